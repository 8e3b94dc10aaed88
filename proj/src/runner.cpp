#include "cropcast/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cropcast::runner {

using nlohmann::json;
using trace::CorrectionRecord;
using trace::ToolName;

json RunConfig::echo() const {
	json tools = json::array();
	for (const auto t : trace::kAllTools)
		if (enabled_tools.count(t)) tools.push_back(trace::tool_name(t));
	json j{{"dataset", use_synthetic ? "synthetic" : dataset_path},
	       {"predictions", predictions_path.empty() ? "builtin" : predictions_path},
	       {"policy", policy},
	       {"horizon", horizon},
	       {"k", k},
	       {"enabled_tools", tools},
	       {"reflection_interval", reflection_interval},
	       {"profile_sample_seed", profile_sample_seed},
	       {"per_plot_bias", per_plot_bias},
	       {"normalize", apply_normalization}};
	if (use_synthetic) {
		json arts = json::array();
		for (const auto &a : synthetic.artifacts)
			arts.push_back({{"kind", ingest::artifact_kind_name(a.kind)}, {"magnitude", a.magnitude}});
		j["synthetic"] = {{"seed", synthetic.seed},
		                  {"n_train", synthetic.n_train},
		                  {"n_test", synthetic.n_test},
		                  {"profile", synthetic.profile == ingest::SyntheticProfile::seasonal
		                                  ? "seasonal"
		                                  : "continuous"},
		                  {"artifacts", arts}};
	}
	if (policy == "remote")
		j["endpoint"] = {{"base_url", endpoint.base_url},
		                 {"path", endpoint.path},
		                 {"model", endpoint.model},
		                 {"temperature", endpoint.temperature},
		                 {"max_tokens", endpoint.max_tokens},
		                 {"timeout_ms", endpoint.timeout_ms},
		                 {"retries", endpoint.retries}};
	return j;
}

std::string RunReport::records_jsonl() const {
	std::ostringstream out;
	for (const auto &r : records) out << r.to_json().dump() << "\n";
	return out.str();
}

Eligibility eligibility(const ingest::Entity &entity, int /*week*/,
                        const memory::MemoryStore &mem) {
	return mem.confirmed_count(entity.entity_id) >= 1 ? Eligibility::correct
	                                                  : Eligibility::passthrough;
}

namespace {

ingest::EntityCollection load_collection(const RunConfig &config) {
	ingest::EntityCollection collection;
	if (config.use_synthetic) {
		collection = ingest::generate_synthetic(config.synthetic.seed, config.synthetic.n_train,
		                                        config.synthetic.n_test, config.synthetic.profile,
		                                        config.synthetic.artifacts);
	} else {
		if (config.dataset_path.empty()) throw ConfigError("run_season: no dataset configured");
		collection = ingest::load_long_csv(config.dataset_path, config.schema);
		if (!config.artifacts_path.empty())
			collection.baseline_artifacts = ingest::load_artifacts_csv(config.artifacts_path);
	}
	if (config.apply_normalization) collection = ingest::normalize(collection);
	return collection;
}

std::unique_ptr<ReasonerPolicy> make_policy(const RunConfig &config) {
	if (config.policy == "remote")
		return std::make_unique<agent::RemotePolicy>(config.endpoint);
	if (config.policy == "rule") return std::make_unique<agent::RulePolicy>();
	throw ConfigError("unknown policy '" + config.policy + "' (expected rule or remote)");
}

double persistence_naive_scale(const std::vector<const ingest::Entity *> &train) {
	double acc = 0.0;
	int n = 0;
	for (const auto *e : train) {
		const auto &obs = e->observations;
		for (std::size_t i = 1; i < obs.size(); ++i) {
			acc += std::abs(obs[i].yield_value - obs[i - 1].yield_value);
			++n;
		}
	}
	if (n == 0 || acc <= 0.0)
		throw ConfigError("run_season: training split has no variation for the MASE scale");
	return acc / n;
}

std::pair<int, int> train_median_season_window(const features::KnowledgeGraph &kg) {
	std::vector<double> starts, ends;
	for (const auto &[id, node] : kg.nodes()) {
		const auto &w = node.features.harvest_window;
		if (w.start_iso_week > 0 && w.end_iso_week >= w.start_iso_week) {
			starts.push_back(w.start_iso_week);
			ends.push_back(w.end_iso_week);
		}
	}
	if (starts.empty()) return {0, 0};
	return {static_cast<int>(std::lround(stats::median(starts))),
	        static_cast<int>(std::lround(stats::median(ends)))};
}

double season_progress(int iso_week, int start, int end) {
	if (end <= start) return 0.0;
	return std::clamp(static_cast<double>(iso_week - start) / static_cast<double>(end - start),
	                  0.0, 1.0);
}

} // namespace

RunReport run_season(const RunConfig &config) {
	const auto collection = load_collection(config);
	const auto train = collection.train_entities();
	const auto test = collection.test_entities();
	if (train.empty()) throw ConfigError("run_season: no training entities");
	if (test.empty()) throw ConfigError("run_season: no test entities");

	const auto policy = make_policy(config);

	const auto kg = features::build_kg(train);
	auto profile = features::profile_dataset(kg, *policy, config.profile_sample_seed);
	profile.zero_floor = 1.0 / collection.normalization_scale;

	agent::AgentEnv env;
	memory::MemoryStore mem(config.per_plot_bias);
	env.kg = &kg;
	env.memory = &mem;
	env.profile = profile;
	env.jump = memory::jump_distribution(train);
	env.enabled_tools = config.enabled_tools;
	env.hist_max = 0.0;
	for (const auto *e : train)
		for (const auto &o : e->observations) env.hist_max = std::max(env.hist_max, o.yield_value);

	const auto position_changes = memory::position_change_index(train, config.horizon);
	const auto [season_start, season_end] = train_median_season_window(kg);

	std::string cache_path = config.cache_path;
	if (cache_path.empty() && !config.out_dir.empty())
		cache_path = config.out_dir + "/dtw_cache.json";

	RunReport report;
	report.config_echo = config.echo();
	report.naive_scale = persistence_naive_scale(train);
	report.dataset_profile = features::dataset_kind_name(profile.kind);
	report.normalization_scale = collection.normalization_scale;
	report.ranking =
	    selection::rank_training_plots(train, test, config.k, cache_path,
	                                   collection.normalization_scale);

	std::vector<const ingest::Entity *> sorted_test = test;
	std::sort(sorted_test.begin(), sorted_test.end(),
	          [](const auto *a, const auto *b) { return a->entity_id < b->entity_id; });

	baseline::Source source;
	ingest::PredictionTable table;
	if (!config.predictions_path.empty()) {
		table = ingest::load_external_predictions(config.predictions_path);
		source.kind = baseline::SourceKind::external;
		source.table = &table;
	}

	const int first_week = baseline::first_predictable_week(config.horizon);
	int last_week = 0;
	for (const auto *e : sorted_test)
		last_week = std::max(last_week, static_cast<int>(e->observations.size()) - 1);

	std::map<std::string, std::map<int, double>> stored_raw; // entity -> week -> raw q50
	std::map<std::string, std::vector<std::size_t>> entity_records;
	int completed_plots = 0;
	int plots_since_reflection = 0;

	for (int week = first_week; week <= last_week; ++week) {
		// 1. Confirm lagged actuals that just became observable (week - horizon),
		//    for every entity, before any prediction this week.
		for (const auto *entity : sorted_test) {
			const int confirmed_week = week - config.horizon;
			const auto &obs = entity->observations;
			if (confirmed_week < 0 || confirmed_week >= static_cast<int>(obs.size())) continue;
			const auto &preds = stored_raw[entity->entity_id];
			const auto it = preds.find(confirmed_week);
			if (it == preds.end()) continue;
			const auto &o = obs[confirmed_week];
			mem.record_lagged_error(entity->entity_id, o.iso_week,
			                        season_progress(o.iso_week, season_start, season_end),
			                        it->second, o.yield_value, confirmed_week);
			// The record for that target week is now scorable.
			for (const auto idx : entity_records[entity->entity_id]) {
				if (report.records[idx].target_week == confirmed_week)
					report.records[idx].actual = o.yield_value;
			}
		}

		// 2. Predict every entity in sorted order, then archive its partial curve.
		for (const auto *entity : sorted_test) {
			const auto &obs = entity->observations;
			if (week >= static_cast<int>(obs.size())) continue;

			baseline::RawPrediction raw;
			try {
				raw = baseline::predict(*entity, week, source, collection.baseline_artifacts,
				                        config.horizon);
			} catch (const baseline::PredictionGapError &err) {
				log_warn(std::string("run_season: skipping prediction: ") + err.what());
				++report.skipped_predictions;
				continue;
			}
			stored_raw[entity->entity_id][week] = raw.q50;

			agent::StateContext ctx;
			ctx.horizon = config.horizon;
			ctx.stored_predictions = &stored_raw[entity->entity_id];
			ctx.season_start_iso = season_start;
			ctx.season_end_iso = season_end;
			ctx.position_changes = &position_changes;
			ctx.jump = env.jump;
			const auto state = agent::assemble_state(*entity, week, raw, ctx);

			CorrectionRecord record;
			if (eligibility(*entity, week, mem) == Eligibility::correct) {
				record = agent::run_react(state, *policy, env);
			} else {
				record.entity_id = entity->entity_id;
				record.target_week = week;
				record.iso_week = state.target_iso_week;
				record.year = state.target_year;
				record.eligible = false;
				record.y_raw = raw.q50;
				record.q10 = raw.q10;
				record.q90 = raw.q90;
				record.lookahead = raw.lookahead_q50;
				record.y_final = raw.q50; // passthrough
				record.policy_used = policy->name();
				record.safety = json::object();
				record.actual_frontier = week - config.horizon;
				record.memory_frontier = mem.bias_table_frontier();
				record.archive_frontier = mem.archive_frontier();
			}
			entity_records[entity->entity_id].push_back(report.records.size());
			report.records.push_back(std::move(record));

			// 3. Archive the observed partial curve for later retrievals.
			const int frontier = week - config.horizon;
			if (frontier >= 0) {
				std::vector<double> partial;
				for (int w = 0; w <= frontier && w < static_cast<int>(obs.size()); ++w)
					partial.push_back(obs[w].yield_value);
				std::vector<CorrectionRecord> outcomes;
				for (const auto idx : entity_records[entity->entity_id])
					outcomes.push_back(report.records[idx]);
				mem.archive_plot(entity->entity_id, features::compute_shape_vector(partial),
				                 outcomes, frontier);
			}

			if (week == static_cast<int>(obs.size()) - 1) {
				++completed_plots;
				++plots_since_reflection;
			}
		}
		mem.advance_step();

		// 4. Meta-strategy reflection every R completed plots.
		if (config.reflection_interval > 0 &&
		    plots_since_reflection >= config.reflection_interval) {
			plots_since_reflection = 0;
			std::vector<CorrectionRecord> window;
			for (const auto &r : report.records)
				if (r.actual) window.push_back(r);
			if (window.size() > 200)
				window.erase(window.begin(), window.end() - 200);
			mem.reflect(window, *policy);
		}
	}

	// Post-run: every actual is now fair game for scoring.
	for (auto &r : report.records) {
		if (r.actual) continue;
		const auto *entity = collection.find(r.entity_id);
		if (entity && r.target_week < static_cast<int>(entity->observations.size()))
			r.actual = entity->observations[r.target_week].yield_value;
	}

	// Summary block: aggregate metrics, per-entity table, tool usage.
	const auto agg = eval::metrics(report.records, report.naive_scale);
	const auto plots = eval::per_plot_improvement(report.records);
	const auto usage = eval::tool_usage(report.records);
	json per_entity = json::array();
	for (const auto &p : plots)
		per_entity.push_back({{"entity_id", p.entity_id},
		                      {"mae_raw", p.mae_raw},
		                      {"mae_corrected", p.mae_corrected},
		                      {"pct_improvement", p.pct_improvement}});
	json usage_json = json::object();
	for (const auto &[tool, rate] : usage.rates) usage_json[tool] = rate;
	report.summary = json{{"config", report.config_echo},
	                      {"dataset_profile", report.dataset_profile},
	                      {"normalization_scale", report.normalization_scale},
	                      {"naive_scale", report.naive_scale},
	                      {"records", report.records.size()},
	                      {"scored", agg.scored},
	                      {"skipped", report.skipped_predictions},
	                      {"completed_plots", completed_plots},
	                      {"metrics", {{"corrected", agg.corrected.to_json()},
	                                   {"raw", agg.raw.to_json()}}},
	                      {"per_entity", per_entity},
	                      {"tool_usage", usage_json},
	                      {"non_trivial_predictions", usage.non_trivial},
	                      {"directives", mem.directives().size()}};

	if (!config.out_dir.empty()) {
		write_report(report, config.out_dir);
		kg.save(config.out_dir + "/kg.json");
		if (config.write_memory_dump) {
			std::ofstream dump(config.out_dir + "/memory.jsonl");
			dump << mem.dump_jsonl();
		}
	}
	return report;
}

void write_report(const RunReport &report, const std::string &out_dir) {
	std::filesystem::create_directories(out_dir);
	{
		std::ofstream out(out_dir + "/records.jsonl");
		if (!out) throw ConfigError("cannot write " + out_dir + "/records.jsonl");
		out << report.records_jsonl();
	}
	{
		std::ofstream out(out_dir + "/summary.json");
		out << report.summary.dump(2) << "\n";
	}
	{
		std::ofstream out(out_dir + "/per_plot.csv");
		out << eval::per_plot_csv(eval::per_plot_improvement(report.records));
	}
	{
		std::ofstream out(out_dir + "/tool_usage.csv");
		out << eval::tool_usage_csv(eval::tool_usage(report.records));
	}
}

std::vector<CorrectionRecord> load_records_jsonl(const std::string &path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open records file: " + path);
	std::vector<CorrectionRecord> records;
	std::string line;
	while (std::getline(in, line)) {
		if (line.empty()) continue;
		records.push_back(CorrectionRecord::from_json(json::parse(line)));
	}
	return records;
}

} // namespace cropcast::runner
