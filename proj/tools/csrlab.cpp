#include "csrlab/config.hpp"
#include "csrlab/error.hpp"
#include "csrlab/log.hpp"
#include "csrlab/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace csrlab;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::config: return 4;
    case ErrorKind::divergence: return 5;
    default: return 1;
    }
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

pipeline::RunConfig load_config(const Options &o) {
    auto config = o.config.empty() ? pipeline::RunConfig{} : cli::parse_config(o.config);
    if (o.seed) config.plan.data_seed = config.plan.model_seed = *o.seed;
    config.validate();
    return config;
}

fs::path out_dir(const Options &o) {
    if (!o.out.empty()) return o.out;
    if (const char *env = std::getenv("CSRLAB_OUT"); env && *env) return env;
    throw Error(ErrorKind::usage, "no output directory: pass --out or set CSRLAB_OUT");
}

void write_file(const fs::path &path, const std::string &content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << content;
}

void gen_synth(const Options &o) {
    auto config = load_config(o);
    if (!config.data.synthetic()) throw Error(ErrorKind::usage, "gen-synth needs a config without data paths");
    const auto dir = out_dir(o);
    const auto data = pipeline::load_data(config.data);
    fs::create_directories(dir / "data");
    corpus::save_parallel(data.train, dir / "data/train.src", dir / "data/train.tgt");
    if (!data.test.empty()) corpus::save_parallel(data.test, dir / "data/test.src", dir / "data/test.tgt");
    std::ostringstream gold;
    for (const auto &[s, t] : data.gold) gold << s << '\t' << t << '\n';
    write_file(dir / "data/gold.tsv", gold.str());
    write_file(dir / "data/config.ini", cli::render_config(config));
    std::cout << "wrote " << data.train.size() << " training and " << data.test.size() << " test pairs to "
              << (dir / "data").string() << '\n';
}

void induce(const Options &o) {
    const auto config = load_config(o);
    const auto dir = out_dir(o) / "lexicon";
    const auto data = pipeline::load_data(config.data);
    const auto induced = pipeline::induce_lexicon(data.train, config.embed, config.align);
    fs::create_directories(dir);
    embed::save_embeddings(induced.source_embeddings, dir / "source.vec");
    embed::save_embeddings(induced.target_embeddings, dir / "target.vec");
    induced.lexicon.forward.save_tsv(dir / "forward.tsv");
    induced.lexicon.backward.save_tsv(dir / "backward.tsv");
    write_file(dir / "config.ini", cli::render_config(config));
    std::cout << "lexicon: " << induced.lexicon.forward.size() << " source words, "
              << induced.lexicon.backward.size() << " target words, " << induced.alignment.iterations
              << " self-learning iterations\n";
    if (!data.gold.empty())
        std::cout << "precision@1 " << pipeline::format_real(pipeline::lexicon_precision(induced.lexicon.forward, data.gold))
                  << '\n';
}

void corrupt(const Options &o) {
    const auto config = load_config(o);
    const auto base = out_dir(o);
    const auto data = pipeline::load_data(config.data);
    align::TranslationLexicon lexicon;
    if (fs::exists(base / "lexicon/forward.tsv") && fs::exists(base / "lexicon/backward.tsv")) {
        lexicon.forward = align::Lexicon::load_tsv(base / "lexicon/forward.tsv");
        lexicon.backward = align::Lexicon::load_tsv(base / "lexicon/backward.tsv");
    } else {
        lexicon = pipeline::induce_lexicon(data.train, config.embed, config.align).lexicon;
    }
    auto noise = config.noise;
    noise.seed = derive_seed(config.plan.data_seed, config.noise.seed);
    noise::RestoreStream stream(data.train, lexicon.forward, lexicon.backward, noise, config.plan.batch_size,
                                config.plan.interleave_denoise);
    std::vector<noise::RestorePair> pairs;
    {
        log::WarningCapture coverage;
        for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) {
            auto batch = stream.next();
            pairs.insert(pairs.end(), batch.pairs.begin(), batch.pairs.end());
        }
    }
    std::ostringstream dump;
    noise::write_dump(dump, pairs);
    write_file(base / "corrupt/dump.tsv", dump.str());
    std::cout << "wrote " << pairs.size() << " restore pairs to " << (base / "corrupt/dump.tsv").string() << '\n';
}

void train(const Options &o) {
    const auto result = pipeline::run_two_stage(load_config(o), out_dir(o));
    std::cout << result.report.summary() << '\n';
}

void evaluate(const Options &o) {
    const auto config = load_config(o);
    const auto dir = out_dir(o);
    const auto report = pipeline::evaluate_run(dir, config.eval);
    report.save(dir / "evaluation.txt");
    std::cout << report.summary() << '\n';
}

void distance(const Options &o, int stage) {
    const auto config = load_config(o);
    std::cout << pipeline::format_real(pipeline::distance_run(out_dir(o), stage, config.eval.distance_subset)) << '\n';
}

void compare(const std::string &a, const std::string &b, std::optional<double> threshold, std::size_t window) {
    const auto log_a = pipeline::load_run_log(a);
    const auto log_b = pipeline::load_run_log(b);
    if (!threshold) threshold = pipeline::final_smoothed_loss(log_b, window);
    if (!threshold) throw Error(ErrorKind::parameter, "run " + b + " has no stage-2 records");
    const auto c = eval::compare_runs(log_a, log_b, *threshold, window);
    auto show = [](const std::optional<std::int64_t> &v) { return v ? std::to_string(*v) : std::string("none"); };
    std::cout << "threshold " << pipeline::format_real(*threshold) << "\nsteps_to_threshold_a " << show(c.steps_a)
              << "\nsteps_to_threshold_b " << show(c.steps_b) << "\nratio "
              << (c.ratio ? pipeline::format_real(*c.ratio) : std::string("none")) << '\n';
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Two-stage code-switching restore pretraining and finetuning"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "run directory (default: $CSRLAB_OUT)");
    app.add_option("--seed", o.seed, "overrides the data and model seeds");
    app.add_flag("--quiet", o.quiet, "suppress progress and warnings");

    auto *cmd_gen = app.add_subcommand("gen-synth", "write the synthetic cipher corpus");
    auto *cmd_induce = app.add_subcommand("induce-lexicon", "train embeddings, align them and extract lexicons");
    auto *cmd_corrupt = app.add_subcommand("corrupt", "dump one epoch of code-switched restore pairs");
    auto *cmd_train = app.add_subcommand("train", "run both training stages and evaluate");
    auto *cmd_eval = app.add_subcommand("evaluate", "recompute metrics for a finished run");
    auto *cmd_dist = app.add_subcommand("distance", "representation distance of a finished run");
    int stage = 2;
    cmd_dist->add_option("--stage", stage, "checkpoint to score (1 or 2)")->check(CLI::IsMember({1, 2}));
    auto *cmd_compare = app.add_subcommand("compare", "steps to a loss threshold for two finished runs");
    std::string run_a, run_b;
    std::optional<double> threshold;
    std::size_t window = 10;
    cmd_compare->add_option("run_a", run_a, "run directory")->required();
    cmd_compare->add_option("run_b", run_b, "baseline run directory")->required();
    cmd_compare->add_option("--threshold", threshold, "loss level (default: final smoothed loss of run_b)");
    cmd_compare->add_option("--window", window, "smoothing window in steps");

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" || arg == "--out" || arg == "--seed") {
            ++i;
            continue;
        }
        if (arg.empty() || arg[0] == '-') continue;
        if (app.get_subcommands([&](const CLI::App *sub) { return sub->get_name() == arg; }).empty()) {
            std::cerr << "error: usage: unknown command '" << arg << "'\n" << app.help();
            return exit_code(ErrorKind::usage);
        }
        break;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "error: usage: " << e.what() << '\n' << app.help();
        return exit_code(ErrorKind::usage);
    }

    log::set_quiet(o.quiet);
    try {
        if (*cmd_gen) gen_synth(o);
        else if (*cmd_induce) induce(o);
        else if (*cmd_corrupt) corrupt(o);
        else if (*cmd_train) train(o);
        else if (*cmd_eval) evaluate(o);
        else if (*cmd_dist) distance(o, stage);
        else if (*cmd_compare) compare(run_a, run_b, threshold, window);
    } catch (const Error &e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception &e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
