#include "cropcast/cli_config.hpp"

#include <fstream>
#include <sstream>

namespace cropcast::cli {

using nlohmann::json;

ingest::CsvSchema schema_from_json(const json &j) {
	ingest::CsvSchema s;
	s.entity_column = j.value("entity", "");
	s.yield_column = j.value("yield", "");
	s.date_column = j.value("date", "");
	s.year_column = j.value("year", "");
	s.week_column = j.value("week", "");
	if (j.contains("metadata"))
		for (const auto &m : j.at("metadata")) s.metadata_columns.push_back(m.get<std::string>());
	s.train_year_max = j.value("train_year_max", 0);
	s.cumulative = j.value("cumulative", false);
	return s;
}

std::vector<ingest::ArtifactSpec> parse_artifact_list(const std::string &text) {
	std::vector<ingest::ArtifactSpec> out;
	std::stringstream items(text);
	std::string item;
	while (std::getline(items, item, '+')) {
		if (item.empty()) continue;
		const auto colon = item.find(':');
		if (colon == std::string::npos)
			throw ConfigError("artifact spec '" + item + "' must be kind:magnitude");
		ingest::ArtifactSpec spec;
		spec.kind = ingest::artifact_kind_from_name(item.substr(0, colon));
		spec.magnitude = std::stod(item.substr(colon + 1));
		out.push_back(spec);
	}
	return out;
}

runner::SyntheticSpec parse_synthetic_spec(const std::string &text) {
	runner::SyntheticSpec spec;
	std::stringstream items(text);
	std::string item;
	while (std::getline(items, item, ',')) {
		if (item.empty()) continue;
		const auto eq = item.find('=');
		if (eq == std::string::npos)
			throw ConfigError("synthetic spec '" + item + "' must be key=value");
		const std::string key = item.substr(0, eq);
		const std::string value = item.substr(eq + 1);
		if (key == "seed") {
			spec.seed = std::stoull(value);
		} else if (key == "train") {
			spec.n_train = std::stoi(value);
		} else if (key == "test") {
			spec.n_test = std::stoi(value);
		} else if (key == "profile") {
			if (value == "seasonal") {
				spec.profile = ingest::SyntheticProfile::seasonal;
			} else if (value == "continuous") {
				spec.profile = ingest::SyntheticProfile::continuous;
			} else {
				throw ConfigError("unknown synthetic profile '" + value + "'");
			}
		} else if (key == "artifacts") {
			spec.artifacts = parse_artifact_list(value);
		} else {
			throw ConfigError("unknown synthetic spec key '" + key + "'");
		}
	}
	return spec;
}

void apply_dataset_flag(runner::RunConfig &config, const std::string &dataset) {
	if (dataset.rfind("synthetic:", 0) == 0) {
		config.use_synthetic = true;
		config.synthetic = parse_synthetic_spec(dataset.substr(10));
		config.dataset_path.clear();
	} else if (dataset == "synthetic") {
		config.use_synthetic = true;
	} else {
		config.use_synthetic = false;
		config.dataset_path = dataset;
	}
}

ingest::CsvSchema schema_from_flag(const std::string &flag_value) {
	std::string text = flag_value;
	if (!text.empty() && text.front() != '{') {
		std::ifstream in(flag_value);
		if (!in) throw ConfigError("cannot open schema file: " + flag_value);
		std::stringstream ss;
		ss << in.rdbuf();
		text = ss.str();
	}
	try {
		return schema_from_json(json::parse(text));
	} catch (const json::exception &err) {
		throw ConfigError(std::string("unparseable schema JSON: ") + err.what());
	}
}

runner::RunConfig config_from_json(const json &j) {
	runner::RunConfig c;
	if (j.contains("dataset")) apply_dataset_flag(c, j.at("dataset").get<std::string>());
	if (j.contains("schema")) c.schema = schema_from_json(j.at("schema"));
	if (j.contains("synthetic")) {
		c.use_synthetic = true;
		const auto &s = j.at("synthetic");
		c.synthetic.seed = s.value("seed", 7ULL);
		c.synthetic.n_train = s.value("n_train", 30);
		c.synthetic.n_test = s.value("n_test", 10);
		c.synthetic.profile = s.value("profile", std::string("seasonal")) == "continuous"
		                          ? ingest::SyntheticProfile::continuous
		                          : ingest::SyntheticProfile::seasonal;
		if (s.contains("artifacts")) {
			for (const auto &a : s.at("artifacts")) {
				ingest::ArtifactSpec spec;
				spec.kind = ingest::artifact_kind_from_name(a.at("kind").get<std::string>());
				spec.magnitude = a.at("magnitude").get<double>();
				c.synthetic.artifacts.push_back(spec);
			}
		}
	}
	c.artifacts_path = j.value("artifacts", "");
	c.predictions_path = j.value("predictions", "");
	c.policy = j.value("policy", "rule");
	if (j.contains("endpoint")) {
		const auto &e = j.at("endpoint");
		c.endpoint.base_url = e.value("base_url", c.endpoint.base_url);
		c.endpoint.path = e.value("path", c.endpoint.path);
		c.endpoint.model = e.value("model", c.endpoint.model);
		c.endpoint.temperature = e.value("temperature", c.endpoint.temperature);
		c.endpoint.max_tokens = e.value("max_tokens", c.endpoint.max_tokens);
		c.endpoint.timeout_ms = e.value("timeout_ms", c.endpoint.timeout_ms);
		c.endpoint.retries = e.value("retries", c.endpoint.retries);
	}
	c.horizon = j.value("horizon", 2);
	c.k = j.value("k", 50);
	c.reflection_interval = j.value("reflection_interval", 10);
	c.profile_sample_seed = j.value("profile_sample_seed", 1ULL);
	c.out_dir = j.value("out_dir", "");
	c.cache_path = j.value("cache_path", "");
	c.apply_normalization = j.value("normalize", true);
	c.per_plot_bias = j.value("per_plot_bias", false);
	c.write_memory_dump = j.value("memory_dump", false);

	if (j.contains("disable_tools")) {
		for (const auto &name : j.at("disable_tools")) {
			const auto tool = trace::tool_from_name(name.get<std::string>());
			if (!tool) throw ConfigError("unknown tool in disable_tools: " + name.get<std::string>());
			c.enabled_tools.erase(*tool);
			if (*tool == trace::ToolName::evaluate_trajectory)
				c.enabled_tools.erase(trace::ToolName::adjust_correction);
		}
	}
	if (j.contains("only_tool") && !j.at("only_tool").get<std::string>().empty()) {
		const auto name = j.at("only_tool").get<std::string>();
		const auto tool = trace::tool_from_name(name);
		if (!tool) throw ConfigError("unknown tool in only_tool: " + name);
		c.enabled_tools = {trace::ToolName::apply_correction, *tool};
		if (*tool == trace::ToolName::evaluate_trajectory)
			c.enabled_tools.insert(trace::ToolName::adjust_correction);
	}
	return c;
}

} // namespace cropcast::cli
