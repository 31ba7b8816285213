// Command-line front end: compile exact models, run them over words, probe
// finite-precision dynamics, generate datasets, train the toy models, evaluate
// length generalization, and run the verification suites.
//
// Conventions shared by all subcommands:
//   - JSON for models/configs/grids, JSONL for datasets and run outputs, CSV
//     for metrics. Every file this tool writes can be read back by this tool.
//   - All outputs are deterministic given the flags and seeds.
//   - Unknown flags or bad flag values print usage and exit 2; runtime
//     failures print a diagnostic to stderr and exit 1.
//   - STATETRACK_THREADS caps the worker count of batch evaluation; training
//     itself always runs on one thread.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "statetrack/checks.hpp"
#include "statetrack/common.hpp"
#include "statetrack/compile.hpp"
#include "statetrack/fsa.hpp"
#include "statetrack/lrnn.hpp"
#include "statetrack/phenom.hpp"
#include "statetrack/precision.hpp"
#include "statetrack/rng.hpp"
#include "statetrack/tasks.hpp"
#include "statetrack/train.hpp"

namespace {

using namespace statetrack;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out.good()) throw std::runtime_error("failed while writing '" + path + "'");
}

// Sink that is stdout by default and a file when --out was given.
class OutputSink {
 public:
    explicit OutputSink(const std::string& path) : path_(path) {
        if (!path_.empty()) {
            file_.open(path_, std::ios::binary);
            if (!file_) throw std::runtime_error("cannot open '" + path_ + "' for writing");
        }
    }
    std::ostream& stream() { return path_.empty() ? std::cout : file_; }
    void finish() {
        stream().flush();
        if (!path_.empty() && !file_.good())
            throw std::runtime_error("failed while writing '" + path_ + "'");
    }

 private:
    std::string path_;
    std::ofstream file_;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(what + ": '" + s + "' is not an integer");
    }
}

// "0110" (one token per digit) or "10,3,0" (comma-separated tokens).
std::vector<int> parse_word(const std::string& text) {
    std::vector<int> tokens;
    if (text.find(',') != std::string::npos) {
        for (const std::string& part : split(text, ','))
            tokens.push_back(parse_int(part, "--word"));
        return tokens;
    }
    for (char c : text) {
        if (c < '0' || c > '9')
            throw std::runtime_error(std::string("--word: character '") + c +
                                     "' is not a digit; use comma-separated tokens instead");
        tokens.push_back(c - '0');
    }
    if (tokens.empty()) throw std::runtime_error("--word: empty word");
    return tokens;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    for (const std::string& part : split(text, ',')) out.push_back(parse_int(part, what));
    return out;
}

// Grid argument: inline JSON when it starts with '{', otherwise a file path.
// Empty string means the default demo grid.
CastGrid parse_grid_arg(const std::string& arg) {
    if (arg.empty()) return CastGrid::default_demo();
    if (!arg.empty() && arg.front() == '{') return CastGrid::from_json_text(arg);
    return CastGrid::from_json_text(read_text_file(arg));
}

// Task strings shared by gen / train / eval:
//   parity | modarith:<m> | cyclic:<m> | sym:<n>
// with --brackets applying to modarith and --variant to sym/cyclic.
TaskSpec parse_task(const std::string& task, bool brackets, const std::string& variant) {
    const std::vector<std::string> parts = split(task, ':');
    TaskSpec spec;
    if (parts[0] == "parity" && parts.size() == 1) {
        spec.kind = TaskSpec::Kind::Parity;
    } else if (parts[0] == "modarith" && parts.size() == 2) {
        spec.kind = TaskSpec::Kind::ModArith;
        spec.modulus = parse_int(parts[1], "--task modarith");
        spec.brackets = brackets;
    } else if (parts[0] == "cyclic" && parts.size() == 2) {
        spec.kind = TaskSpec::Kind::GroupWord;
        spec.group = GroupSpec::cyclic(parse_int(parts[1], "--task cyclic"));
    } else if (parts[0] == "sym" && parts.size() == 2) {
        spec.kind = TaskSpec::Kind::GroupWord;
        spec.group = GroupSpec::symmetric(parse_int(parts[1], "--task sym"));
    } else {
        throw std::runtime_error("--task: expected parity, modarith:<m>, cyclic:<m> or sym:<n>, "
                                 "got '" +
                                 task + "'");
    }
    if (spec.kind == TaskSpec::Kind::GroupWord) {
        const std::vector<std::string> v = split(variant, ':');
        if (v[0] == "full" && v.size() == 1) {
            spec.variant = VariantSpec::full();
        } else if (v[0] == "swaps" && v.size() == 1) {
            spec.variant = VariantSpec::swaps_only();
        } else if (v[0] == "upto3" && v.size() == 1) {
            spec.variant = VariantSpec::up_to_3();
        } else if (v[0] == "k" && v.size() == 2) {
            spec.variant = VariantSpec::k_tokens(parse_int(v[1], "--variant k"));
        } else {
            throw std::runtime_error("--variant: expected full, swaps, upto3 or k:<k>, got '" +
                                     variant + "'");
        }
    }
    return spec;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// compile
// ---------------------------------------------------------------------------

struct CompileArgs {
    std::string target;
    std::string out;
    bool restrict_01 = false;
    bool strict_gh = false;
    int renorm = 0;
};

// Permutation-group description file: {"n": 5, "generators": [[1,0,2,3,4], ...]}
// in one-line notation (entry i is the image of point i). "n" may be omitted
// and is then inferred from the first generator.
LrnnModel compile_perm_file(const std::string& path, const CompileOptions& options) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("perm file '" + path + "': " + e.what());
    }
    if (!j.contains("generators") || !j["generators"].is_array() || j["generators"].empty())
        throw std::runtime_error("perm file '" + path +
                                 "': expected a non-empty \"generators\" array");
    std::vector<Permutation> gens;
    for (const auto& g : j["generators"]) {
        if (!g.is_array()) throw std::runtime_error("perm file: generators must be arrays");
        gens.push_back(g.get<Permutation>());
    }
    const int n = j.value("n", static_cast<int>(gens[0].size()));
    return compile_permutation_group(n, gens, options);
}

int cmd_compile(const CompileArgs& args) {
    CompileOptions options;
    options.restrict_unit_interval = args.restrict_01;
    options.strict_gh = args.strict_gh;

    const std::vector<std::string> parts = split(args.target, ':');
    LrnnModel model;
    if (parts[0] == "parity" && parts.size() == 1) {
        model = compile_parity(options);
    } else if (parts[0] == "cyclic" && parts.size() == 2) {
        model = compile_cyclic(parse_int(parts[1], "--target cyclic"), options);
    } else if (parts[0] == "modrefl" && parts.size() == 2) {
        model = compile_mod_reflections(parse_int(parts[1], "--target modrefl"), options);
    } else if (parts[0] == "perm" && parts.size() == 2) {
        model = compile_perm_file(parts[1], options);
    } else if (parts[0] == "cascade" && parts.size() == 2) {
        model = cascade_to_lrnn(Cascade::from_json_text(read_text_file(parts[1])), options);
    } else {
        throw std::runtime_error("--target: expected parity, cyclic:<m>, perm:<file>, "
                                 "modrefl:<m> or cascade:<file>, got '" +
                                 args.target + "'");
    }
    if (args.renorm < 0) throw std::runtime_error("--renorm: must be >= 0");
    model.renormalize_every = args.renorm;
    write_text_file(args.out, model.to_json_text());
    return 0;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunArgs {
    std::string model;
    std::string word;
    std::string tokens_path;
    std::string grid;
    bool use_grid = false;
    std::string out;
};

int cmd_run(const RunArgs& args) {
    const LrnnModel model = LrnnModel::from_json_text(read_text_file(args.model));
    std::optional<CastGrid> grid;
    if (args.use_grid) grid = parse_grid_arg(args.grid);
    auto run_one = [&](const std::vector<int>& word) {
        return grid ? model_run_cast(model, word, *grid) : model_run(model, word);
    };

    OutputSink sink(args.out);
    if (!args.word.empty()) {
        // One JSON number per line: the model's output at each position.
        for (int label : run_one(parse_word(args.word))) sink.stream() << label << "\n";
    } else {
        // One JSON array per input sample, in file order.
        for (const Sample& s : read_jsonl(args.tokens_path)) {
            const std::vector<int> outputs = run_one(s.tokens);
            nlohmann::json arr = outputs;
            sink.stream() << arr.dump() << "\n";
        }
    }
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

struct DemoArgs {
    std::string kind;
    std::string grid;
    long long kmax = 100000;
    long long max_period = 256;
    uint64_t seed = 1;
    std::string out;
};

int cmd_demo(const DemoArgs& args) {
    const CastGrid grid = parse_grid_arg(args.grid);
    const std::vector<std::string> parts = split(args.kind, ':');
    DemoReport report;
    if ((parts[0] == "positive" || parts[0] == "positive_eigs") && parts.size() == 1) {
        Rng rng(args.seed);
        report = demo_theorem(DemoKind::PositiveEigs, sample_positive_layer(rng), grid, args.kmax,
                              0, args.max_period);
    } else if ((parts[0] == "negative" || parts[0] == "negative_real") && parts.size() == 1) {
        Rng rng(args.seed);
        report = demo_theorem(DemoKind::NegativeReal, sample_negative_layer(rng), grid, args.kmax,
                              0, args.max_period);
    } else if (parts[0] == "rotation" && parts.size() == 2) {
        const int m = parse_int(parts[1], "--kind rotation");
        report = demo_theorem(DemoKind::Rotation, rotation_demo_layer(m), grid, args.kmax, m,
                              args.max_period);
    } else {
        throw std::runtime_error("--kind: expected positive, negative or rotation:<m>, got '" +
                                 args.kind + "'");
    }
    OutputSink sink(args.out);
    sink.stream() << report.to_json_text() << "\n";
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string task;
    bool brackets = false;
    std::string variant = "full";
    int len_min = 3;
    int len_max = 40;
    int len = 32;
    int count = 100;
    uint64_t seed = 1;
    std::string out;
};

std::vector<Sample> generate_samples(const GenArgs& args) {
    const TaskSpec spec = parse_task(args.task, args.brackets, args.variant);
    switch (spec.kind) {
        case TaskSpec::Kind::Parity:
            return gen_parity(args.len_min, args.len_max, args.count, args.seed);
        case TaskSpec::Kind::ModArith:
            return gen_mod_arith(spec.modulus, spec.brackets, args.len_min, args.len_max,
                                 args.count, args.seed);
        case TaskSpec::Kind::GroupWord:
            return gen_group_word(spec.group, spec.variant, args.len, args.count, args.seed);
    }
    throw std::runtime_error("gen: unreachable");
}

int cmd_gen(const GenArgs& args) {
    const std::vector<Sample> samples = generate_samples(args);
    OutputSink sink(args.out);
    for (const Sample& s : samples) sink.stream() << s.to_json_line() << "\n";
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string task;
    bool brackets = false;
    std::string variant = "full";
    std::string layer;
    std::string range;
    std::string config_path;
    int d_model = 64;
    int num_layers = 0;  // 0 = default per layer kind
    std::string metrics;
    std::string checkpoint;
    // Convenience overrides of the config file.
    std::optional<uint64_t> seed;
    std::optional<long long> steps;
    std::optional<double> lr;
    std::optional<int> batch;
};

int cmd_train(const TrainArgs& args) {
    const TaskSpec task = parse_task(args.task, args.brackets, args.variant);

    TrainConfig cfg;
    if (!args.config_path.empty())
        cfg = TrainConfig::from_json_text(read_text_file(args.config_path));
    if (args.seed) cfg.seed = *args.seed;
    if (args.steps) cfg.steps = *args.steps;
    if (args.lr) cfg.lr = *args.lr;
    if (args.batch) cfg.batch_size = *args.batch;
    if (cfg.eval_lengths.empty()) {
        // Length-generalization defaults: well past the training range for
        // token-level tasks; training length plus one extrapolation point for
        // group tasks (whole-sequence metric).
        cfg.eval_lengths = task.sequence_metric() ? std::vector<int>{cfg.len_max, 256}
                                                  : std::vector<int>{40, 64, 96, 128, 192, 256};
    }

    LayerSpec layer;
    if (args.layer == "diag") {
        layer.kind = LayerKind::Diagonal;
    } else if (args.layer == "delta") {
        layer.kind = LayerKind::Delta;
    } else if (args.layer == "full") {
        layer.kind = LayerKind::FullMatrix;
    } else {
        throw std::runtime_error("--layer: expected diag, delta or full, got '" + args.layer +
                                 "'");
    }
    if (args.range == "01") {
        layer.range = EigenRange::UnitInterval;
    } else if (args.range == "sym") {
        layer.range = EigenRange::Symmetric;
    } else {
        throw std::runtime_error("--range: expected 01 or sym, got '" + args.range + "'");
    }

    TrainableSpec spec;
    spec.vocab = task.vocab_size();
    spec.n_out = task.label_count();
    spec.d_model = args.d_model;
    int layers = args.num_layers;
    if (layers == 0) layers = layer.kind == LayerKind::Diagonal ? 2 : 1;
    spec.layers.assign(static_cast<size_t>(layers), layer);

    TrainableModel model = TrainableModel::build(spec, cfg.seed * 1000 + 7);
    const TrainResult result = train_loop(model, task, cfg);

    OutputSink sink(args.metrics);
    sink.stream() << metrics_to_csv(result.history);
    sink.finish();
    if (!args.checkpoint.empty()) write_text_file(args.checkpoint, model.to_json_text());
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model;
    std::string task;
    bool brackets = false;
    std::string variant = "full";
    std::string lengths;
    int samples = 200;
    uint64_t seed = 1;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    const TaskSpec task = parse_task(args.task, args.brackets, args.variant);
    const std::vector<int> lengths = parse_int_list(args.lengths, "--lengths");

    // Checkpoints from `train` carry a "params" array; everything else is an
    // exact compiled model.
    const std::string text = read_text_file(args.model);
    bool trainable = false;
    try {
        trainable = nlohmann::json::parse(text).contains("params");
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model file '" + args.model + "': " + e.what());
    }
    std::optional<TrainableModel> tm;
    std::optional<LrnnModel> lm;
    Predictor predict;
    if (trainable) {
        tm = TrainableModel::from_json_text(text);
        predict = predictor_from_trainable(*tm);
    } else {
        lm = LrnnModel::from_json_text(text);
        predict = predictor_from_lrnn(*lm);
    }

    const std::vector<LengthGenResult> results =
        eval_length_gen(predict, task, lengths, args.samples, args.seed);
    OutputSink sink(args.out);
    sink.stream() << "length,accuracy,scaled_accuracy\n";
    for (const LengthGenResult& r : results)
        sink.stream() << r.length << "," << format_double(r.accuracy) << ","
                      << format_double(r.scaled) << "\n";
    sink.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite) {
    const std::vector<CheckResult> results = run_verification(suite);
    std::cout << format_verification_table(results);
    std::cout.flush();
    for (const CheckResult& r : results)
        if (!r.pass) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"statetrack: exact linear-RNN constructions for automata and group word "
                 "problems, finite-precision impossibility demos, dataset generators, and "
                 "desk-scale trainable models."};
    app.require_subcommand(1);
    app.footer("Environment:\n  STATETRACK_THREADS  caps the worker count used by batch "
               "evaluation;\n                      training always runs single-threaded.");

    CompileArgs compile_args;
    CLI::App* compile_cmd =
        app.add_subcommand("compile", "Emit exact model weights for a target construction");
    compile_cmd
        ->add_option("--target", compile_args.target,
                     "parity | cyclic:<m> | perm:<file> | modrefl:<m> | cascade:<file>")
        ->required();
    compile_cmd->add_option("--out", compile_args.out, "output model JSON path")->required();
    compile_cmd->add_flag("--restrict-01", compile_args.restrict_01,
                          "refuse constructions needing eigenvalues below 0");
    compile_cmd->add_flag("--strict-gh", compile_args.strict_gh,
                          "materialize zero transitions as explicit GH factor products");
    compile_cmd->add_option("--renorm", compile_args.renorm,
                            "renormalize 2-D states every N steps (0 = never)");

    RunArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "Run a compiled model over words");
    run_cmd->add_option("--model", run_args.model, "model JSON path")->required();
    CLI::Option* word_opt = run_cmd->add_option(
        "--word", run_args.word, "single word: digits ('0110') or comma-separated tokens");
    CLI::Option* tokens_opt =
        run_cmd->add_option("--tokens", run_args.tokens_path,
                            "JSONL dataset; runs the model over every line's tokens");
    word_opt->excludes(tokens_opt);
    CLI::Option* grid_opt = run_cmd->add_option(
        "--grid", run_args.grid,
        "cast states to this grid each step (JSON file or inline; empty = default grid)");
    grid_opt->expected(0, 1);
    run_cmd->add_option("--out", run_args.out, "write outputs here instead of stdout");

    DemoArgs demo_args;
    CLI::App* demo_cmd =
        app.add_subcommand("demo", "Finite-precision state-orbit periodicity demos");
    demo_cmd
        ->add_option("--kind", demo_args.kind,
                     "positive | negative | rotation:<m> (accepted aliases: positive_eigs, "
                     "negative_real)")
        ->required();
    demo_cmd->add_option("--grid", demo_args.grid, "grid JSON file or inline (default demo grid)");
    demo_cmd->add_option("--kmax", demo_args.kmax, "number of steps to simulate")
        ->default_val(100000);
    demo_cmd->add_option("--max-period", demo_args.max_period, "largest period to search for")
        ->default_val(256);
    demo_cmd->add_option("--seed", demo_args.seed, "seed for the sampled layer")->default_val(1);
    demo_cmd->add_option("--out", demo_args.out, "write the JSON report here instead of stdout");

    GenArgs gen_args;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate task datasets as JSONL");
    gen_cmd
        ->add_option("--task", gen_args.task, "parity | modarith:<m> | cyclic:<m> | sym:<n>")
        ->required();
    gen_cmd->add_flag("--brackets", gen_args.brackets, "bracketed expressions (modarith only)");
    gen_cmd->add_option("--variant", gen_args.variant,
                        "group variant: full | swaps | upto3 | k:<k>");
    gen_cmd->add_option("--len-min", gen_args.len_min, "min length (parity/modarith)")
        ->default_val(3);
    gen_cmd->add_option("--len-max", gen_args.len_max, "max length (parity/modarith)")
        ->default_val(40);
    gen_cmd->add_option("--len", gen_args.len, "word length (group tasks)")->default_val(32);
    gen_cmd->add_option("--count", gen_args.count, "number of samples")->default_val(100);
    gen_cmd->add_option("--seed", gen_args.seed, "generator seed")->default_val(1);
    gen_cmd->add_option("--out", gen_args.out, "write JSONL here instead of stdout");

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a toy recurrent model on a task");
    train_cmd
        ->add_option("--task", train_args.task, "parity | modarith:<m> | cyclic:<m> | sym:<n>")
        ->required();
    train_cmd->add_flag("--brackets", train_args.brackets, "bracketed expressions (modarith)");
    train_cmd->add_option("--variant", train_args.variant,
                          "group variant: full | swaps | upto3 | k:<k>");
    train_cmd->add_option("--layer", train_args.layer, "diag | delta | full")->required();
    train_cmd->add_option("--range", train_args.range, "eigenvalue range: 01 | sym")->required();
    train_cmd->add_option("--config", train_args.config_path, "TrainConfig JSON file");
    train_cmd->add_option("--d-model", train_args.d_model, "hidden width")->default_val(64);
    train_cmd->add_option("--num-layers", train_args.num_layers,
                          "recurrent layers (default: 2 for diag, 1 otherwise)");
    train_cmd->add_option("--metrics", train_args.metrics,
                          "write the metrics CSV here instead of stdout");
    train_cmd->add_option("--checkpoint", train_args.checkpoint,
                          "write the trained model JSON here");
    train_cmd->add_option("--seed", train_args.seed, "override the config seed");
    train_cmd->add_option("--steps", train_args.steps, "override the config step count");
    train_cmd->add_option("--lr", train_args.lr, "override the config learning rate");
    train_cmd->add_option("--batch", train_args.batch, "override the config batch size");

    EvalArgs eval_args;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Length-generalization evaluation of a model checkpoint");
    eval_cmd->add_option("--model", eval_args.model, "compiled model or train checkpoint JSON")
        ->required();
    eval_cmd
        ->add_option("--task", eval_args.task, "parity | modarith:<m> | cyclic:<m> | sym:<n>")
        ->required();
    eval_cmd->add_flag("--brackets", eval_args.brackets, "bracketed expressions (modarith)");
    eval_cmd->add_option("--variant", eval_args.variant,
                         "group variant: full | swaps | upto3 | k:<k>");
    eval_cmd->add_option("--lengths", eval_args.lengths, "comma-separated evaluation lengths")
        ->required();
    eval_cmd->add_option("--samples", eval_args.samples, "samples per length")->default_val(200);
    eval_cmd->add_option("--seed", eval_args.seed, "evaluation data seed")->default_val(1);
    eval_cmd->add_option("--out", eval_args.out, "write the CSV here instead of stdout");

    std::string verify_suite = "all";
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "Run the invariant/property suites and print a table");
    verify_cmd
        ->add_option("--suite", verify_suite, "all | t1 | t2 | prop1 | t3 | t4 | appe")
        ->transform(CLI::IsMember({"all", "t1", "t2", "prop1", "t3", "t4", "appe"}, CLI::ignore_case));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const std::vector<CLI::App*> parsed = app.get_subcommands();
        std::cerr << (parsed.size() == 1 ? parsed[0]->help() : app.help());
        return 2;
    }

    try {
        if (app.got_subcommand(compile_cmd)) return cmd_compile(compile_args);
        if (app.got_subcommand(run_cmd)) {
            if (run_args.word.empty() && run_args.tokens_path.empty())
                throw std::runtime_error("run: provide --word or --tokens");
            run_args.use_grid = grid_opt->count() > 0;
            return cmd_run(run_args);
        }
        if (app.got_subcommand(demo_cmd)) return cmd_demo(demo_args);
        if (app.got_subcommand(gen_cmd)) return cmd_gen(gen_args);
        if (app.got_subcommand(train_cmd)) return cmd_train(train_args);
        if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_args);
        if (app.got_subcommand(verify_cmd)) return cmd_verify(verify_suite);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "statetrack: " << e.what() << "\n";
        return 1;
    }
}
