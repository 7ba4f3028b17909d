// Command-line entry point: extract, score, sweep, predict, report.
//
// Settings are resolved in this order, later wins: built-in defaults, the
// --config JSON file, LMOFS_* environment variables, command-line flags.

#include <iostream>

#include <CLI11.hpp>

#include "lmofs/pipeline.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<lmofs::Seed> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> output_dir;
    std::optional<std::string> resources;
    std::optional<std::string> train, truth, schema;
    std::optional<std::size_t> min_subset_size, runs;
    std::optional<double> coverage, alpha, budget, threshold;
    bool budget_override = false;
    bool keep_going = false;
    bool resume = false;
    std::string predict_input, predict_schema = "challenge_jsonl", predict_output;
};

lmofs::PipelineConfig resolve(const Flags& f) {
    lmofs::PipelineConfig c;
    if (!f.config.empty()) lmofs::load_config_file(c, f.config);
    lmofs::apply_environment(c);
    if (f.seed) c.seed = f.seed;
    if (f.workers) c.workers = *f.workers;
    if (f.output_dir) c.output_dir = *f.output_dir;
    if (f.resources) c.resources_dir = *f.resources;
    if (f.train) c.train_path = *f.train;
    if (f.truth) c.truth_path = *f.truth;
    if (f.schema) c.schema = lmofs::parse_schema(*f.schema);
    if (f.min_subset_size) c.min_subset_size = f.min_subset_size;
    if (f.runs) c.runs = f.runs;
    if (f.coverage) c.coverage = *f.coverage;
    if (f.alpha) c.alpha = *f.alpha;
    if (f.budget) c.compute_budget = *f.budget;
    if (f.threshold) c.impact_threshold = *f.threshold;
    c.budget_override = f.budget_override;
    c.keep_going = f.keep_going;
    c.resume = f.resume;
    c.predict_path = f.predict_input;
    c.predict_schema = lmofs::parse_schema(f.predict_schema);
    c.predict_output = f.predict_output;
    if (c.workers == 0) throw lmofs::Error("--workers must be positive");
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leave-many-out feature selection for clickbait scoring"};
    app.require_subcommand(1);
    Flags f;

    app.add_option("--config", f.config, "JSON config file");
    app.add_option("--seed", f.seed, "master seed (required by score and sweep)");
    app.add_option("--workers", f.workers, "parallel workers");
    app.add_option("--output-dir", f.output_dir, "directory for all pipeline files");
    app.add_option("--resources", f.resources, "resources directory (word lists, lexicon, abbreviations)");

    auto* extract = app.add_subcommand("extract", "build the vocabulary and cache the feature matrix");
    extract->add_option("--train", f.train, "training instances (JSON lines)");
    extract->add_option("--truth", f.truth, "truth file for challenge_jsonl");
    extract->add_option("--schema", f.schema, "challenge_jsonl or simple_jsonl");

    auto* score = app.add_subcommand("score", "run leave-many-out scoring");
    score->add_option("--min-subset-size,-m", f.min_subset_size, "minimum subset size m");
    score->add_option("--runs,-r", f.runs, "number of runs r");
    score->add_option("--coverage,-c", f.coverage, "coverage target r(n-m)/n");
    score->add_option("--alpha", f.alpha, "ridge penalty");
    score->add_option("--budget", f.budget, "compute budget on n*r*(n-m)");
    score->add_flag("--budget-override", f.budget_override, "run even when over budget");
    score->add_flag("--keep-going", f.keep_going, "record failed runs and continue");
    score->add_flag("--resume", f.resume, "reuse complete runs from an existing records.tsv");

    auto* sweep = app.add_subcommand("sweep", "evaluate nested top-ranked subsets and pick the best");
    sweep->add_option("--alpha", f.alpha, "ridge penalty");

    auto* predict = app.add_subcommand("predict", "score instances with the selected model");
    predict->add_option("--input", f.predict_input, "instances to score")->required();
    predict->add_option("--input-schema", f.predict_schema, "challenge_jsonl or simple_jsonl");
    predict->add_option("--output", f.predict_output, "results file (default <output-dir>/results.jsonl)");

    auto* report = app.add_subcommand("report", "list high-impact features per category");
    report->add_option("--threshold", f.threshold, "absolute score threshold");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = resolve(f);
        if (extract->parsed()) lmofs::cmd_extract(config, std::cout);
        if (score->parsed()) lmofs::cmd_score(config, std::cout);
        if (sweep->parsed()) lmofs::cmd_sweep(config, std::cout);
        if (predict->parsed()) lmofs::cmd_predict(config, std::cout);
        if (report->parsed()) lmofs::cmd_report(config, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
