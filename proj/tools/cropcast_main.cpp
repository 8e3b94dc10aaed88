#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cropcast/ablation.hpp"
#include "cropcast/cli_config.hpp"
#include "cropcast/runner.hpp"

using nlohmann::json;
using namespace cropcast;

namespace {

struct SharedFlags {
	std::string config_path;
	std::string dataset;
	std::string schema;
	std::string predictions;
	std::string artifacts;
	std::string policy;
	std::string endpoint;
	std::string model;
	int horizon = -1;
	int k = -1;
	std::vector<std::string> disable_tools;
	std::string only_tool;
	std::uint64_t seed = 0;
	bool seed_set = false;
	std::string out_dir;
	bool no_normalize = false;
	bool memory_dump = false;
	bool per_plot_bias = false;
};

void add_shared_flags(CLI::App *cmd, SharedFlags &f) {
	cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
	cmd->add_option("--dataset", f.dataset, "dataset CSV path, or synthetic:<spec>");
	cmd->add_option("--schema", f.schema, "CSV schema as inline JSON or a path to a JSON file");
	cmd->add_option("--predictions", f.predictions, "external baseline predictions CSV");
	cmd->add_option("--artifacts", f.artifacts, "resolved baseline artifacts CSV");
	cmd->add_option("--policy", f.policy, "rule or remote");
	cmd->add_option("--endpoint", f.endpoint, "remote policy base URL");
	cmd->add_option("--model", f.model, "remote policy model id");
	cmd->add_option("--horizon", f.horizon, "forecast horizon in weeks");
	cmd->add_option("--k", f.k, "DTW selection size");
	cmd->add_option("--disable-tool", f.disable_tools, "disable a tool (repeatable)");
	cmd->add_option("--only-tool", f.only_tool, "enable a single tool (plus apply_correction)");
	cmd->add_option("--seed", f.seed, "synthetic dataset seed")->each([&](const std::string &) {
		f.seed_set = true;
	});
	cmd->add_option("--out-dir", f.out_dir, "report output directory");
	cmd->add_flag("--no-normalize", f.no_normalize, "skip max-scaling normalization");
	cmd->add_flag("--memory-dump", f.memory_dump, "write memory.jsonl next to the report");
	cmd->add_flag("--per-plot-bias", f.per_plot_bias,
	              "scope the position-bias table per plot instead of sharing it");
}

runner::RunConfig build_config(const SharedFlags &f) {
	runner::RunConfig config;
	if (!f.config_path.empty()) {
		std::ifstream in(f.config_path);
		if (!in) throw ConfigError("cannot open config file: " + f.config_path);
		config = cli::config_from_json(json::parse(in));
	}
	if (!f.dataset.empty()) cli::apply_dataset_flag(config, f.dataset);
	if (!f.schema.empty()) config.schema = cli::schema_from_flag(f.schema);
	if (!f.predictions.empty()) config.predictions_path = f.predictions;
	if (!f.artifacts.empty()) config.artifacts_path = f.artifacts;
	if (!f.policy.empty()) config.policy = f.policy;
	if (!f.endpoint.empty()) config.endpoint.base_url = f.endpoint;
	if (!f.model.empty()) config.endpoint.model = f.model;
	if (f.horizon > 0) config.horizon = f.horizon;
	if (f.k > 0) config.k = f.k;
	if (f.seed_set) config.synthetic.seed = f.seed;
	if (!f.out_dir.empty()) config.out_dir = f.out_dir;
	if (f.no_normalize) config.apply_normalization = false;
	if (f.memory_dump) config.write_memory_dump = true;
	if (f.per_plot_bias) config.per_plot_bias = true;

	for (const auto &name : f.disable_tools) {
		const auto tool = trace::tool_from_name(name);
		if (!tool) throw ConfigError("unknown tool: " + name);
		config.enabled_tools.erase(*tool);
		if (*tool == trace::ToolName::evaluate_trajectory)
			config.enabled_tools.erase(trace::ToolName::adjust_correction);
	}
	if (!f.only_tool.empty()) {
		const auto tool = trace::tool_from_name(f.only_tool);
		if (!tool) throw ConfigError("unknown tool: " + f.only_tool);
		config.enabled_tools = {trace::ToolName::apply_correction, *tool};
		if (*tool == trace::ToolName::evaluate_trajectory)
			config.enabled_tools.insert(trace::ToolName::adjust_correction);
	}
	return config;
}

void print_metrics_line(const char *label, const eval::MetricTriple &m) {
	std::printf("%-10s MAE %.6f  RMSE %.6f  MASE %.4f\n", label, m.mae, m.rmse, m.mase);
}

int cmd_run(const SharedFlags &flags) {
	auto config = build_config(flags);
	const auto report = runner::run_season(config);
	const auto agg = eval::metrics(report.records, report.naive_scale);
	std::printf("dataset profile: %s | records: %zu | scored: %d | skipped: %d\n",
	            report.dataset_profile.c_str(), report.records.size(), agg.scored,
	            report.skipped_predictions);
	print_metrics_line("raw", agg.raw);
	print_metrics_line("corrected", agg.corrected);
	if (!config.out_dir.empty())
		std::printf("report written to %s\n", config.out_dir.c_str());
	return 0;
}

int cmd_ablate(const SharedFlags &flags, const std::string &mode_name) {
	auto config = build_config(flags);
	const auto mode = mode_name == "only-one" ? eval::AblationMode::only_one
	                                          : eval::AblationMode::leave_one_out;
	if (mode_name != "only-one" && mode_name != "leave-one-out")
		throw ConfigError("--mode must be leave-one-out or only-one");
	const auto result = eval::ablate(config, mode);
	const auto table = eval::ablation_markdown(result);
	std::printf("%s", table.c_str());
	if (!config.out_dir.empty()) {
		std::filesystem::create_directories(config.out_dir);
		const auto path = config.out_dir + "/ablation_" + mode_name + ".md";
		std::ofstream out(path);
		out << table;
		std::printf("written to %s\n", path.c_str());
	}
	return 0;
}

int cmd_profile(const SharedFlags &flags) {
	auto config = build_config(flags);
	auto collection = config.use_synthetic
	                      ? ingest::generate_synthetic(config.synthetic.seed, config.synthetic.n_train,
	                                                   config.synthetic.n_test,
	                                                   config.synthetic.profile,
	                                                   config.synthetic.artifacts)
	                      : ingest::load_long_csv(config.dataset_path, config.schema);
	if (config.apply_normalization) collection = ingest::normalize(collection);
	const auto kg = features::build_kg(collection.train_entities());
	agent::RulePolicy policy;
	const auto profile = features::profile_dataset(kg, policy, config.profile_sample_seed);

	std::printf("dataset: %s\n", collection.dataset_name.c_str());
	std::printf("profile: %s\n", features::dataset_kind_name(profile.kind).c_str());
	std::printf("knowledge graph: %zu nodes\n", kg.size());
	for (const auto &[id, year, frac] : profile.evidence)
		std::printf("  sampled %s %d: zero fraction %.3f\n", id.c_str(), year, frac);
	int shown = 0;
	for (const auto &[id, node] : kg.nodes()) {
		if (++shown > 5) break;
		std::printf("  node %s: pattern %s, window %d-%d-%d, zero %.2f\n", id.c_str(),
		            features::growth_pattern_name(node.features.growth_pattern).c_str(),
		            node.features.harvest_window.start_iso_week,
		            node.features.harvest_window.peak_iso_week,
		            node.features.harvest_window.end_iso_week, node.features.zero_fraction);
	}
	return 0;
}

int cmd_gen_synthetic(const SharedFlags &flags, const std::string &out_path,
                      const std::string &artifacts_out) {
	auto config = build_config(flags);
	if (!config.use_synthetic) config.use_synthetic = true;
	const auto collection = ingest::generate_synthetic(
	    config.synthetic.seed, config.synthetic.n_train, config.synthetic.n_test,
	    config.synthetic.profile, config.synthetic.artifacts);
	ingest::write_dataset_csv(collection, out_path);
	std::printf("dataset written to %s (%zu entities)\n", out_path.c_str(),
	            collection.entities.size());
	if (!artifacts_out.empty()) {
		ingest::write_artifacts_csv(collection.baseline_artifacts, artifacts_out);
		std::printf("artifacts written to %s (%zu rows)\n", artifacts_out.c_str(),
		            collection.baseline_artifacts.size());
	}
	return 0;
}

int cmd_report(const std::string &in_dir) {
	const auto records = runner::load_records_jsonl(in_dir + "/records.jsonl");
	std::ifstream in(in_dir + "/summary.json");
	if (!in) throw ConfigError("cannot open " + in_dir + "/summary.json");
	const json summary = json::parse(in);
	const double naive_scale = summary.at("naive_scale").get<double>();

	const auto agg = eval::metrics(records, naive_scale);
	std::printf("## Metrics\n\n");
	std::printf("| Forecast | MAE | RMSE | MASE |\n|---|---|---|---|\n");
	std::printf("| raw | %.4f | %.4f | %.4f |\n", agg.raw.mae, agg.raw.rmse, agg.raw.mase);
	std::printf("| corrected | %.4f | %.4f | %.4f |\n\n", agg.corrected.mae, agg.corrected.rmse,
	            agg.corrected.mase);

	const auto usage = eval::tool_usage(records);
	std::printf("## Tool usage (over %d non-trivial predictions)\n\n", usage.non_trivial);
	std::printf("| Tool | Call rate |\n|---|---|\n");
	for (const auto &[tool, rate] : usage.rates)
		std::printf("| %s | %.1f%% |\n", tool.c_str(), 100.0 * rate);

	std::printf("\n## Per-plot improvement\n\n");
	std::printf("| Entity | MAE raw | MAE corrected | Improvement |\n|---|---|---|---|\n");
	for (const auto &p : eval::per_plot_improvement(records))
		std::printf("| %s | %.4f | %.4f | %.1f%% |\n", p.entity_id.c_str(), p.mae_raw,
		            p.mae_corrected, p.pct_improvement);
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"post-hoc correction engine for weekly yield forecasts"};
	app.require_subcommand(1);

	SharedFlags flags;
	std::string ablate_mode = "leave-one-out";
	std::string gen_out = "synthetic.csv";
	std::string gen_artifacts_out;
	std::string report_in;

	auto *run = app.add_subcommand("run", "run the correction loop over a dataset");
	add_shared_flags(run, flags);

	auto *ablate = app.add_subcommand("ablate", "run the tool ablation matrix");
	add_shared_flags(ablate, flags);
	ablate->add_option("--mode", ablate_mode, "leave-one-out or only-one");

	auto *profile = app.add_subcommand("profile", "print the dataset profile and KG summary");
	add_shared_flags(profile, flags);

	auto *gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset CSV");
	add_shared_flags(gen, flags);
	gen->add_option("--out", gen_out, "output dataset CSV path");
	gen->add_option("--artifacts-out", gen_artifacts_out, "output artifacts CSV path");

	auto *report = app.add_subcommand("report", "render tables from a stored run report");
	report->add_option("--in", report_in, "report directory (records.jsonl + summary.json)")
	    ->required();

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		app.exit(e);
		return e.get_exit_code() == 0 ? 0 : 1;
	}

	try {
		if (run->parsed()) return cmd_run(flags);
		if (ablate->parsed()) return cmd_ablate(flags, ablate_mode);
		if (profile->parsed()) return cmd_profile(flags);
		if (gen->parsed()) return cmd_gen_synthetic(flags, gen_out, gen_artifacts_out);
		if (report->parsed()) return cmd_report(report_in);
	} catch (const ConfigError &err) {
		std::fprintf(stderr, "configuration error: %s\n", err.what());
		return 1;
	} catch (const std::exception &err) {
		std::fprintf(stderr, "runtime error: %s\n", err.what());
		return 2;
	}
	return 0;
}
