#pragma once

// Command-line front end. Kept in a header so the test suite can drive the
// exact same code path in-process.

#include "metaage/checkpoint.hpp"
#include "metaage/data.hpp"
#include "metaage/metrics.hpp"
#include "metaage/retrieval.hpp"
#include "metaage/synth.hpp"
#include "metaage/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace metaage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return json::parse(in);
}

inline std::vector<double> parse_grid(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw UsageError(std::string(what) + ": cannot parse '" + item + "' as a number");
        }
        if (used != item.size() || !std::isfinite(v) || v < 0.0) {
            throw UsageError(std::string(what) + ": '" + item + "' is not a finite non-negative number");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw UsageError(std::string(what) + ": empty grid");
    }
    return out;
}

/// Expands `--config <file>` (flat key=value lines, '#' comments) into
/// `--key value` arguments placed before the command-line ones, so explicit
/// flags win.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> rest;
    std::vector<std::string> from_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] != "--config") {
            rest.push_back(args[i]);
            continue;
        }
        if (i + 1 >= args.size()) {
            throw UsageError("--config needs a file argument");
        }
        std::ifstream in(args[++i]);
        if (!in) {
            throw UsageError("cannot read config file " + args[i]);
        }
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line.erase(hash);
            }
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw UsageError(args[i] + ":" + std::to_string(line_no) + ": expected key=value");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            const std::string flag = "--" + key;
            if (std::find(args.begin(), args.end(), flag) != args.end()) {
                continue;  // overridden on the command line
            }
            from_file.push_back(flag);
            if (value != "true") {
                from_file.push_back(value);
            }
        }
    }
    // Subcommand name stays first so its options parse in its scope.
    std::vector<std::string> out;
    if (!rest.empty()) {
        out.push_back(rest.front());
        out.insert(out.end(), from_file.begin(), from_file.end());
        out.insert(out.end(), rest.begin() + 1, rest.end());
    }
    return out;
}

struct Manifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::string started_at;
    std::vector<std::string> artifacts;

    void write(const fs::path& dir) {
        const fs::path path = dir / "manifest.json";
        artifacts.push_back(path.string());
        json j;
        j["command"] = command;
        j["config"] = config;
        j["seed"] = seed;
        j["started_at"] = started_at;
        j["finished_at"] = utc_now();
        j["artifacts"] = artifacts;
        write_text(path, j.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------------------
// Options shared by train and sweep
// ---------------------------------------------------------------------------

struct TrainFlags {
    std::string model = "metaage";
    int epochs = 60;
    std::size_t batch = 64;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lambda = 0.2;
    double delta = 2.0;
    Eigen::Index hidden = 128;
    std::uint64_t seed = 7;
    std::string target = "hard";
    bool adapter = false;

    void add_to(CLI::App& app) {
        app.add_option("--model", model, "metaage | global | concat")
            ->check(CLI::IsMember({"metaage", "global", "concat"}))
            ->capture_default_str();
        app.add_option("--epochs", epochs)->check(CLI::PositiveNumber)->capture_default_str();
        app.add_option("--batch", batch, "minibatch size (>= 2)")->check(CLI::Range(2, 1 << 30))->capture_default_str();
        app.add_option("--lr", lr)->check(CLI::PositiveNumber)->capture_default_str();
        app.add_option("--beta1", beta1)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        app.add_option("--beta2", beta2)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        app.add_option("--adam-eps", adam_eps)->check(CLI::PositiveNumber)->capture_default_str();
        app.add_option("--lambda", lambda, "ordinal loss weight")->check(CLI::NonNegativeNumber)->capture_default_str();
        app.add_option("--delta", delta, "hinge margin")->check(CLI::NonNegativeNumber)->capture_default_str();
        app.add_option("--hidden", hidden, "hidden width H")->check(CLI::PositiveNumber)->capture_default_str();
        app.add_option("--seed", seed)->capture_default_str();
        app.add_option("--target", target, "hard | distribution")
            ->check(CLI::IsMember({"hard", "distribution"}))
            ->capture_default_str();
        app.add_flag("--adapter", adapter, "train a D x D affine adapter on age features");
    }

    TrainConfig resolve(const Dataset& ds) const {
        TrainConfig c;
        c.dims = {ds.K, ds.D, ds.F, hidden};
        c.model_kind = parse_model_kind(model);
        c.epochs = epochs;
        c.batch_size = batch;
        c.adam = {lr, beta1, beta2, adam_eps};
        c.loss.lambda = lambda;
        c.loss.delta = delta;
        c.loss.target_mode = target == "distribution" ? TargetMode::label_distribution : TargetMode::hard_onehot;
        c.use_adapter = adapter;
        c.seed = seed;
        try {
            c.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        return c;
    }

    json to_json() const {
        return {{"model", model}, {"epochs", epochs},   {"batch", batch},   {"lr", lr},
                {"beta1", beta1}, {"beta2", beta2},     {"adam_eps", adam_eps}, {"lambda", lambda},
                {"delta", delta}, {"hidden", hidden},   {"seed", seed},     {"target", target},
                {"adapter", adapter}};
    }
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct SynthFlags {
    SynthConfig cfg;
    double train_fraction = 0.8;
    std::string split_mode = "identity";
    int folds = 0;  // >= 2 also writes fold_<i>/ cross-validation splits
    std::string out;
};

inline json oracle_json(const SynthOracle& o) {
    return {{"bayes_mae_global", o.bayes_mae_global}, {"bayes_mae_personal", o.bayes_mae_personal}};
}

inline int cmd_synth(const SynthFlags& f, std::ostream& log) {
    Manifest man{"synth", {}, f.cfg.seed, utc_now(), {}};
    try {
        f.cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!(f.train_fraction > 0.0 && f.train_fraction < 1.0)) {
        throw UsageError("--train-fraction must lie strictly between 0 and 1");
    }
    if (f.folds == 1 || f.folds < 0) {
        throw UsageError("--folds must be 0 (off) or >= 2");
    }
    const SynthData raw = synth_generate_raw(f.cfg);
    const Split parts = split(raw.dataset, f.train_fraction, f.cfg.seed, f.split_mode == "identity");
    const SynthOracle all = compute_oracle(raw.dataset, raw.offsets, f.cfg);
    const SynthOracle tr = compute_oracle(parts.train, raw.offsets, f.cfg);
    const SynthOracle te = compute_oracle(parts.test, raw.offsets, f.cfg);

    const fs::path dir(f.out);
    fs::create_directories(dir);
    write_features((dir / "train.mafv1").string(), parts.train);
    write_features((dir / "test.mafv1").string(), parts.test);
    json oj = oracle_json(all);
    oj["train"] = oracle_json(tr);
    oj["test"] = oracle_json(te);
    oj["offsets"] = raw.offsets;
    std::vector<std::string> fold_files;
    if (f.folds >= 2) {
        json folds = json::array();
        for (int k = 0; k < f.folds; ++k) {
            const Split fold = kfold_split(raw.dataset, f.folds, k, f.cfg.seed, f.split_mode == "identity");
            const fs::path fdir = dir / ("fold_" + std::to_string(k));
            fs::create_directories(fdir);
            write_features((fdir / "train.mafv1").string(), fold.train);
            write_features((fdir / "test.mafv1").string(), fold.test);
            fold_files.push_back((fdir / "train.mafv1").string());
            fold_files.push_back((fdir / "test.mafv1").string());
            folds.push_back({{"train", oracle_json(compute_oracle(fold.train, raw.offsets, f.cfg))},
                             {"test", oracle_json(compute_oracle(fold.test, raw.offsets, f.cfg))}});
        }
        oj["folds"] = std::move(folds);
    }
    write_text(dir / "oracle.json", oj.dump(2) + "\n");

    man.config = {{"identities", f.cfg.n_identities}, {"per_identity", f.cfg.samples_per_identity},
                  {"k", f.cfg.K},                     {"d", f.cfg.D},
                  {"f", f.cfg.F},                     {"latent", f.cfg.latent_dim},
                  {"offset_max", f.cfg.offset_max},   {"noise", f.cfg.feature_noise},
                  {"rbf_width", f.cfg.rbf_width},     {"seed", f.cfg.seed},
                  {"train_fraction", f.train_fraction}, {"split", f.split_mode},
                  {"folds", f.folds}};
    man.artifacts = {(dir / "train.mafv1").string(), (dir / "test.mafv1").string(), (dir / "oracle.json").string()};
    man.artifacts.insert(man.artifacts.end(), fold_files.begin(), fold_files.end());
    man.write(dir);
    log << std::setprecision(6) << "wrote " << parts.train.size() << " train / " << parts.test.size()
        << " test records to " << dir.string() << "; oracle MAE global " << te.bayes_mae_global << ", personal "
        << te.bayes_mae_personal << " (test split)\n";
    return kExitOk;
}

inline int cmd_train(const TrainFlags& f, const std::string& data, const std::string& out, std::ostream& log) {
    Manifest man{"train", f.to_json(), f.seed, utc_now(), {}};
    const Dataset ds = read_features(data);
    const TrainConfig cfg = f.resolve(ds);
    const TrainedModel m = train(ds, cfg);

    const fs::path dir(out);
    fs::create_directories(dir);
    write_model((dir / "model.mapc").string(), m);
    write_text(dir / "history.csv", history_csv(m.history));
    man.config["data"] = data;
    man.artifacts = {(dir / "model.mapc").string(), (dir / "history.csv").string()};
    man.write(dir);
    log << std::setprecision(6) << "trained " << to_string(m.kind) << " for " << cfg.epochs
        << " epochs; final loss " << m.history.back().loss << ", train MAE " << m.history.back().train_mae << "\n";
    return kExitOk;
}

inline int cmd_eval(const std::string& model_path, const std::string& data, const std::string& out, int theta_max,
                    std::ostream& log) {
    Manifest man{"eval", {{"model_file", model_path}, {"data", data}, {"theta_max", theta_max}}, 0, utc_now(), {}};
    const TrainedModel m = read_model(model_path);
    const Dataset ds = read_features(data);
    const EvalResult r = evaluate(m, ds, theta_max);

    const fs::path dir(out);
    fs::create_directories(dir);
    write_text(dir / "eval.json", to_json(r).dump(2) + "\n");
    write_text(dir / "cs_curve.csv", cs_curve_csv(r.cs_curve));
    man.artifacts = {(dir / "eval.json").string(), (dir / "cs_curve.csv").string()};
    man.write(dir);
    log << std::setprecision(6) << "MAE " << r.mae << " over " << r.n_samples << " samples";
    if (r.eps_error) {
        log << ", eps-error " << *r.eps_error;
    }
    log << "\n";
    return kExitOk;
}

inline int cmd_sweep(const TrainFlags& f, const std::string& train_path, const std::string& test_path,
                     const std::string& lambdas_text, const std::string& deltas_text, const std::string& out,
                     std::ostream& log) {
    const std::vector<double> lambdas = parse_grid(lambdas_text, "--lambdas");
    const std::vector<double> deltas = parse_grid(deltas_text, "--deltas");
    Manifest man{"sweep", f.to_json(), f.seed, utc_now(), {}};
    man.config["lambdas"] = lambdas;
    man.config["deltas"] = deltas;
    man.config["train"] = train_path;
    man.config["test"] = test_path;
    const Dataset tr = read_features(train_path);
    const Dataset te = read_features(test_path);
    const TrainConfig cfg = f.resolve(tr);
    const std::vector<SweepRow> rows = lambda_delta_sweep(tr, te, cfg, lambdas, deltas);

    const fs::path dir(out);
    fs::create_directories(dir);
    write_text(dir / "sweep.csv", sweep_csv(rows));
    man.artifacts = {(dir / "sweep.csv").string()};
    man.write(dir);
    for (const SweepRow& r : rows) {
        log << std::setprecision(6) << "lambda " << r.lambda << " delta " << r.delta << " -> MAE " << r.mae << "\n";
    }
    return kExitOk;
}

struct RetrieveFlags {
    std::string model_file;
    std::string data;
    std::string oracle;
    std::string out;
    double percent = 10.0;
    std::size_t max_queries = 0;  // 0 = every record
    std::size_t keep = 0;         // ranked entries kept per query in the report, 0 = all
};

inline int cmd_retrieve(const RetrieveFlags& f, std::ostream& log) {
    Manifest man{"retrieve",
                 {{"model_file", f.model_file},
                  {"data", f.data},
                  {"oracle", f.oracle},
                  {"percent", f.percent},
                  {"max_queries", f.max_queries},
                  {"keep", f.keep}},
                 0,
                 utc_now(),
                 {}};
    const TrainedModel m = read_model(f.model_file);
    if (m.kind != ModelKind::metaage) {
        throw std::runtime_error(std::string("retrieval needs a metaage checkpoint; got a ") + to_string(m.kind) +
                                 " model, which has no per-sample weights");
    }
    const Dataset ds = read_features(f.data);
    if (ds.F != m.dims.F || ds.D != m.dims.D || ds.K != m.dims.K) {
        throw ShapeError("gallery dims do not match the checkpoint");
    }
    std::vector<double> offsets;
    if (!f.oracle.empty()) {
        offsets = read_json(f.oracle).at("offsets").get<std::vector<double>>();
    }

    const Matrix gallery = weight_embeddings(m.meta, gather_all(ds).identity);
    const std::size_t n = ds.size();
    const std::size_t n_queries = f.max_queries == 0 ? n : std::min(n, f.max_queries);
    bool degenerate = true;
    json queries = json::array();
    double top_id = 0, bottom_id = 0, top_sign = 0, bottom_sign = 0;
    std::size_t id_queries = 0, sign_queries = 0;
    auto sign_of = [&](std::size_t i) -> int {
        const double o = offsets.at(*ds.records[i].identity_id);
        return (o > 0.0) - (o < 0.0);
    };
    for (std::size_t q = 0; q < n_queries; ++q) {
        const RetrievalResult r = retrieve(gallery.row(static_cast<Eigen::Index>(q)).transpose(), gallery, q);
        if (r.distances.back() != 0.0) {
            degenerate = false;
        }
        // Rates are measured over the gallery without the query itself.
        std::vector<std::size_t> others;
        others.reserve(n - 1);
        for (std::size_t i : r.ranked_indices) {
            if (i != q) {
                others.push_back(i);
            }
        }
        json jq;
        jq["query_index"] = q;
        const std::size_t keep = f.keep == 0 ? n : std::min(n, f.keep);
        jq["ranked_indices"] = std::vector<std::size_t>(r.ranked_indices.begin(), r.ranked_indices.begin() + keep);
        jq["distances"] = std::vector<double>(r.distances.begin(), r.distances.begin() + keep);
        const auto& qid = ds.records[q].identity_id;
        if (qid && !others.empty()) {
            const auto [top, bottom] = slice_match_rates(
                others, f.percent, [&](std::size_t i) { return ds.records[i].identity_id == qid; });
            jq["top_same_identity"] = top;
            jq["bottom_same_identity"] = bottom;
            top_id += top;
            bottom_id += bottom;
            ++id_queries;
            if (!offsets.empty()) {
                const int s = sign_of(q);
                const auto [ts, bs] =
                    slice_match_rates(others, f.percent, [&](std::size_t i) { return sign_of(i) == s; });
                jq["top_same_offset_sign"] = ts;
                jq["bottom_same_offset_sign"] = bs;
                top_sign += ts;
                bottom_sign += bs;
                ++sign_queries;
            }
        }
        queries.push_back(std::move(jq));
    }

    json report;
    report["percent"] = f.percent;
    report["degenerate"] = degenerate;
    report["queries"] = std::move(queries);
    json summary = json::object();
    if (id_queries > 0) {
        summary["top_same_identity"] = top_id / static_cast<double>(id_queries);
        summary["bottom_same_identity"] = bottom_id / static_cast<double>(id_queries);
    }
    if (sign_queries > 0) {
        summary["top_same_offset_sign"] = top_sign / static_cast<double>(sign_queries);
        summary["bottom_same_offset_sign"] = bottom_sign / static_cast<double>(sign_queries);
    }
    report["summary"] = summary;

    const fs::path dir(f.out);
    fs::create_directories(dir);
    write_text(dir / "retrieval.json", report.dump(2) + "\n");
    man.artifacts = {(dir / "retrieval.json").string()};
    man.write(dir);
    log << "retrieval over " << n << " gallery items, " << n_queries << " queries";
    if (degenerate) {
        log << " (degenerate: all generated weights identical)";
    }
    log << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// `args` excludes the program name. Returns the process exit code.
inline int run(const std::vector<std::string>& raw_args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Personalized age-estimator meta-learner: synthesize data, train, evaluate, sweep, retrieve"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    SynthFlags sf;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic personalized-aging benchmark");
    synth->add_option("--identities", sf.cfg.n_identities)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--per-identity", sf.cfg.samples_per_identity)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--k", sf.cfg.K, "age classes")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--d", sf.cfg.D, "age feature width")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--f", sf.cfg.F, "identity feature width")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--latent", sf.cfg.latent_dim)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--offset-max", sf.cfg.offset_max)->check(CLI::NonNegativeNumber)->capture_default_str();
    synth->add_option("--noise", sf.cfg.feature_noise)->check(CLI::NonNegativeNumber)->capture_default_str();
    synth->add_option("--rbf-width", sf.cfg.rbf_width)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--seed", sf.cfg.seed)->capture_default_str();
    synth->add_option("--train-fraction", sf.train_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    synth->add_option("--split", sf.split_mode, "identity | record")
        ->check(CLI::IsMember({"identity", "record"}))
        ->capture_default_str();
    synth->add_option("--folds", sf.folds, "also write k cross-validation folds (0 = off)")->capture_default_str();
    synth->add_option("--out", sf.out, "output directory")->required();

    TrainFlags tf;
    std::string train_data, train_out;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model on a MAFV1 feature file");
    tf.add_to(*train_cmd);
    train_cmd->add_option("--data", train_data)->required();
    train_cmd->add_option("--out", train_out, "run directory")->required();

    std::string eval_model, eval_data, eval_out;
    int theta_max = 10;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint: MAE, CS curve, eps-error");
    eval_cmd->add_option("--model-file", eval_model)->required();
    eval_cmd->add_option("--data", eval_data)->required();
    eval_cmd->add_option("--out", eval_out)->required();
    eval_cmd->add_option("--theta-max", theta_max)->check(CLI::NonNegativeNumber)->capture_default_str();

    TrainFlags wf;
    std::string sweep_train, sweep_test, lambdas = "0,0.1,0.2,0.4,0.5,1,2,10", deltas = "2", sweep_out;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "lambda x delta grid of train + test MAE");
    wf.add_to(*sweep_cmd);
    sweep_cmd->add_option("--train", sweep_train)->required();
    sweep_cmd->add_option("--test", sweep_test)->required();
    sweep_cmd->add_option("--lambdas", lambdas, "comma-separated")->capture_default_str();
    sweep_cmd->add_option("--deltas", deltas, "comma-separated")->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out)->required();

    RetrieveFlags rf;
    CLI::App* retr = app.add_subcommand("retrieve", "rank a gallery by distance between generated weights");
    retr->add_option("--model-file", rf.model_file)->required();
    retr->add_option("--data", rf.data, "gallery (queries are its first records)")->required();
    retr->add_option("--oracle", rf.oracle, "synth oracle.json, enables offset-sign rates");
    retr->add_option("--percent", rf.percent)->check(CLI::Range(0.0, 100.0))->capture_default_str();
    retr->add_option("--max-queries", rf.max_queries)->capture_default_str();
    retr->add_option("--keep", rf.keep, "ranked entries per query in the report (0 = all)")->capture_default_str();
    retr->add_option("--out", rf.out)->required();

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(sf, out);
        if (train_cmd->parsed()) return cmd_train(tf, train_data, train_out, out);
        if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data, eval_out, theta_max, out);
        if (sweep_cmd->parsed()) return cmd_sweep(wf, sweep_train, sweep_test, lambdas, deltas, sweep_out, out);
        if (retr->parsed()) return cmd_retrieve(rf, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace metaage::cli
