#include "cropcast/agent.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace cropcast::agent {

using nlohmann::json;

std::string RemotePolicy::request_body(const RemoteEndpoint &endpoint, const std::string &prompt) {
	// nlohmann orders object keys alphabetically, which pins the wire bytes.
	const json body{{"max_tokens", endpoint.max_tokens},
	                {"messages", json::array({json{{"content", prompt}, {"role", "user"}}})},
	                {"model", endpoint.model},
	                {"temperature", endpoint.temperature}};
	return body.dump();
}

std::string RemotePolicy::decide(const std::string &prompt) {
	const std::string body = request_body(endpoint_, prompt);

	std::string last_error;
	for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
		if (attempt > 0) {
			std::this_thread::sleep_for(std::chrono::milliseconds(endpoint_.backoff_ms * attempt));
			log_info("remote policy: retry " + std::to_string(attempt) + " after: " + last_error);
		}
		httplib::Client client(endpoint_.base_url);
		client.set_connection_timeout(0, endpoint_.timeout_ms * 1000);
		client.set_read_timeout(0, endpoint_.timeout_ms * 1000);
		client.set_write_timeout(0, endpoint_.timeout_ms * 1000);

		auto res = client.Post(endpoint_.path, body, "application/json");
		if (!res) {
			last_error = "transport error: " + httplib::to_string(res.error());
			continue;
		}
		if (res->status < 200 || res->status >= 300) {
			last_error = "status " + std::to_string(res->status);
			continue;
		}
		try {
			const json reply = json::parse(res->body);
			const std::string content =
			    reply.at("choices").at(0).at("message").at("content").get<std::string>();
			if (reply.contains("usage")) {
				const auto &usage = reply["usage"];
				log_info("remote policy: " +
				         std::to_string(usage.value("prompt_tokens", 0)) + " prompt tokens, " +
				         std::to_string(usage.value("completion_tokens", 0)) + " output tokens");
			}
			return content;
		} catch (const std::exception &err) {
			last_error = std::string("malformed response: ") + err.what();
		}
	}
	throw PolicyError("remote policy exhausted " + std::to_string(endpoint_.retries) +
	                  " retries: " + last_error);
}

} // namespace cropcast::agent
