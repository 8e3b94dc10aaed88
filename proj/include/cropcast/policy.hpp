#pragma once

#include <stdexcept>
#include <string>

namespace cropcast {

enum class PolicyKind { rule, remote };

// A reasoning policy turns a rendered prompt into a reply. The rule policy is
// deterministic; the remote policy speaks a chat wire protocol to an LLM
// endpoint. Transport failures surface as PolicyError so callers can fall
// back.
class ReasonerPolicy {
public:
	virtual ~ReasonerPolicy() = default;
	virtual std::string decide(const std::string &prompt) = 0;
	virtual std::string name() const = 0;
	virtual PolicyKind kind() const = 0;
};

class PolicyError : public std::runtime_error {
public:
	explicit PolicyError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace cropcast
