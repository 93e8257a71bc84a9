#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsnkg/config.hpp"
#include "rsnkg/evaluator.hpp"
#include "rsnkg/graph_io.hpp"
#include "rsnkg/kg.hpp"
#include "rsnkg/model.hpp"
#include "rsnkg/srprs.hpp"
#include "rsnkg/trainer.hpp"
#include "rsnkg/walker.hpp"

namespace fs = std::filesystem;
using namespace rsnkg;

namespace {

// Usage-level mistake (missing required input, contradictory flags) that
// CLI11 cannot catch because the value may legally come from a config
// file. Exit code 1, distinct from DataError's 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Flag / config-file resolution. Every flag registers under a dotted key;
// precedence is CLI flag > config file > task preset > built-in default.

enum class Source : std::uint8_t { Default, Preset, File, Cli };

class OptionSet {
public:
    explicit OptionSet(CLI::App* cmd) : cmd_(cmd) {}

    void add_string(const std::string& flag, const std::string& key, std::string& field,
                    const std::string& desc, bool plumbing = false) {
        CLI::Option* opt = cmd_->add_option(flag, field, desc);
        push(key, desc, opt, plumbing,
             [&field](const std::string& text, const std::string&) { field = text; },
             [&field] { return field; });
    }

    void add_choice(const std::string& flag, const std::string& key, std::string& field,
                    std::vector<std::string> choices, const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, field, desc)->check(CLI::IsMember(choices));
        push(key, desc, opt, false,
             [&field](const std::string& text, const std::string&) { field = text; },
             [&field] { return field; });
    }

    void add_double(const std::string& flag, const std::string& key, double& field,
                    const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, field, desc);
        push(key, desc, opt, false,
             [&field](const std::string& text, const std::string& what) {
                 field = parse_double(text, what);
             },
             [&field] { return format_double(field); });
    }

    void add_uint32(const std::string& flag, const std::string& key, std::uint32_t& field,
                    const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, field, desc);
        push(key, desc, opt, false,
             [&field](const std::string& text, const std::string& what) {
                 const std::uint64_t v = parse_uint(text, what);
                 if (v > 0xffffffffULL) throw DataError(what + ": value out of range: " + text);
                 field = static_cast<std::uint32_t>(v);
             },
             [&field] { return std::to_string(field); });
    }

    void add_uint64(const std::string& flag, const std::string& key, std::uint64_t& field,
                    const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, field, desc);
        push(key, desc, opt, false,
             [&field](const std::string& text, const std::string& what) {
                 field = parse_uint(text, what);
             },
             [&field] { return std::to_string(field); });
    }

    void add_int(const std::string& flag, const std::string& key, int& field,
                 const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, field, desc);
        push(key, desc, opt, false,
             [&field](const std::string& text, const std::string& what) {
                 field = static_cast<int>(parse_int(text, what));
             },
             [&field] { return std::to_string(field); });
    }

    // `spec` should offer both polarities ("--x,!--no-x") so the CLI can
    // override a config file in either direction.
    void add_flag(const std::string& spec, const std::string& key, bool& field,
                  const std::string& desc) {
        CLI::Option* opt = cmd_->add_flag(spec, field, desc);
        push(key, desc, opt, false,
             [&field](const std::string& text, const std::string& what) {
                 field = parse_bool(text, what);
             },
             [&field] { return format_bool(field); });
    }

    // Overlays config-file values onto every field the CLI left untouched.
    void finalize(const ConfigFile& file) {
        for (Entry& e : entries_) {
            if (e.opt->count() > 0) {
                e.source = Source::Cli;
            } else if (file.has(e.key)) {
                e.assign(file.raw(e.key), file.source() + ": key " + e.key);
                e.source = Source::File;
            }
        }
    }

    // True while neither the CLI nor the file has touched the key, i.e. a
    // task preset may still write it.
    bool tunable(const std::string& key) const { return find(key).source == Source::Default; }
    void mark(const std::string& key) { find(key).source = Source::Preset; }

    // The semantic configuration: plumbing keys (output locations) do not
    // change what is computed, so they stay out of the manifest and its
    // fingerprint. The verbatim invocation is preserved in argv.
    std::map<std::string, std::string> semantic() const {
        std::map<std::string, std::string> m;
        for (const Entry& e : entries_)
            if (!e.plumbing) m[e.key] = e.render();
        return m;
    }

    std::uint64_t hash() const { return config_hash(semantic()); }

    void dump(std::ostream& out, std::set<std::string>& seen) const {
        for (const Entry& e : entries_) {
            if (!seen.insert(e.key).second) continue;
            out << "# " << e.desc << "\n" << e.key << " = " << e.default_text << "\n";
        }
    }

private:
    struct Entry {
        std::string key;
        std::string desc;
        CLI::Option* opt;
        bool plumbing;
        std::function<void(const std::string&, const std::string&)> assign;
        std::function<std::string()> render;
        std::string default_text;
        Source source = Source::Default;
    };

    void push(const std::string& key, const std::string& desc, CLI::Option* opt, bool plumbing,
              std::function<void(const std::string&, const std::string&)> assign,
              std::function<std::string()> render) {
        Entry e{key, desc, opt, plumbing, std::move(assign), std::move(render), "", Source::Default};
        e.default_text = e.render();
        entries_.push_back(std::move(e));
    }

    Entry& find(const std::string& key) {
        for (Entry& e : entries_)
            if (e.key == key) return e;
        throw InternalError("unknown config key: " + key);
    }
    const Entry& find(const std::string& key) const {
        return const_cast<OptionSet*>(this)->find(key);
    }

    CLI::App* cmd_;
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Shared option groups and the run-directory/manifest plumbing.

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::string run_name;
};

void add_common(OptionSet& opts, CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path,
                    "flat 'key = value' file; explicit flags override it");
    opts.add_string("--out-dir", "out.dir", c.out_dir,
                    "root for run directories; env RSNKG_DATA_DIR applies when unset", true);
    opts.add_string("--run-name", "run.name", c.run_name,
                    "fixed run directory name (default: run-<utc>-<confighash>)", true);
}

ConfigFile load_config(const CommonOpts& c) {
    return c.config_path.empty() ? ConfigFile() : ConfigFile::load(c.config_path);
}

void apply_env_out_dir(OptionSet& opts, CommonOpts& c) {
    if (!opts.tunable("out.dir")) return;
    if (const char* env = std::getenv("RSNKG_DATA_DIR"); env && *env) {
        c.out_dir = env;
        opts.mark("out.dir");
    }
}

// Checksummed before the run directory exists, so a missing input aborts
// the run without leaving an empty directory behind.
std::map<std::string, std::string> checksum_inputs(std::initializer_list<std::string> paths) {
    std::map<std::string, std::string> sums;
    for (const std::string& p : paths)
        if (!p.empty()) sums[p] = to_hex(checksum_file(p));
    return sums;
}

struct RunContext {
    fs::path dir;
    RunManifest manifest;

    void output(const std::string& name, const std::string& filename) {
        manifest.outputs[name] = filename;
        manifest.output_checksums[name] = to_hex(checksum_file((dir / filename).string()));
    }
    void finish() {
        manifest.finished_utc = iso_utc_now();
        manifest.write((dir / "manifest.json").string());
    }
};

RunContext begin_run(const std::string& command, const std::vector<std::string>& argv,
                     const OptionSet& opts, const CommonOpts& c) {
    RunContext run;
    run.manifest.command = command;
    run.manifest.argv = argv;
    run.manifest.config = opts.semantic();
    run.manifest.started_utc = iso_utc_now();

    const fs::path root = c.out_dir.empty() ? fs::path(".") : fs::path(c.out_dir);
    if (!c.run_name.empty()) {
        run.dir = root / c.run_name;
    } else {
        const std::string stem = "run-" + compact_utc_now() + "-" + to_hex(opts.hash()).substr(0, 8);
        run.dir = root / stem;
        for (int i = 2; fs::exists(run.dir); ++i) run.dir = root / (stem + "-" + std::to_string(i));
    }
    fs::create_directories(run.dir);
    return run;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << content;
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

// Walk geometry shared by sample-paths and train's internal resampling.
struct WalkOpts {
    WalkConfig cfg;
    std::string mode = "cross";
    bool deterministic = false;
};

void add_walk(OptionSet& opts, WalkOpts& w, const std::string& seed_flag) {
    opts.add_double("--alpha", "walk.alpha", w.cfg.alpha, "depth bias in (0,1)");
    opts.add_double("--beta", "walk.beta", w.cfg.beta,
                    "cross-graph bias in (0,1); inert in single mode");
    opts.add_uint32("--length", "walk.length", w.cfg.max_length,
                    "elements per path; even values are lowered to the next odd count");
    opts.add_uint32("--rounds", "walk.rounds", w.cfg.rounds, "sampling rounds per triple");
    opts.add_choice("--mode", "walk.mode", w.mode, {"cross", "single"},
                    "cross: bias walks across the two source graphs; single: one graph");
    opts.add_uint64(seed_flag, "walk.seed", w.cfg.seed, "walk sampling seed");
    opts.add_int("--threads", "walk.threads", w.cfg.threads, "walk sampling worker count");
    opts.add_flag("--start-on-originals,!--no-start-on-originals", "walk.start_on_originals",
                  w.cfg.start_on_originals, "seed walks from pre-reverse triples only");
    opts.add_flag("--deterministic,!--no-deterministic", "run.deterministic", w.deterministic,
                  "force single-threaded execution for bit-reproducible artifacts");
}

void apply_walk_preset(OptionSet& opts, WalkOpts& w, const TaskSettings& ts) {
    if (opts.tunable("walk.alpha")) {
        w.cfg.alpha = ts.walk.alpha;
        opts.mark("walk.alpha");
    }
    if (opts.tunable("walk.beta")) {
        w.cfg.beta = ts.walk.beta;
        opts.mark("walk.beta");
    }
    if (opts.tunable("walk.length")) {
        w.cfg.max_length = ts.walk.max_length;
        opts.mark("walk.length");
    }
    if (opts.tunable("walk.mode")) {
        w.mode = ts.walk.mode == WalkMode::CrossKg ? "cross" : "single";
        opts.mark("walk.mode");
    }
}

WalkConfig resolve_walk(const WalkOpts& w) {
    WalkConfig cfg = w.cfg;
    cfg.mode = w.mode == "single" ? WalkMode::SingleKg : WalkMode::CrossKg;
    if (w.deterministic) cfg.threads = 1;
    std::string warning;
    cfg.validate(&warning);
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
    return cfg;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareCmd {
    CLI::App* cmd;
    OptionSet opts;
    CommonOpts common;
    std::string kg1, kg2, seeds;
    bool reverse = true;

    explicit PrepareCmd(CLI::App& app)
        : cmd(app.add_subcommand("prepare",
                                 "assemble a single or joint graph with reverse relations")),
          opts(cmd) {
        opts.add_string("--kg1", "prepare.kg1", kg1, "triples TSV of the (first) graph");
        opts.add_string("--kg2", "prepare.kg2", kg2, "triples TSV of the second graph (optional)");
        opts.add_string("--seeds", "prepare.seeds", seeds,
                        "seed alignment TSV 'entity1<TAB>entity2' (needs --kg2)");
        opts.add_flag("--reverse,!--no-reverse", "prepare.reverse", reverse,
                      "add a reverse triple (o, r#inv, s) per original");
        add_common(opts, cmd, common);
    }

    int run(const std::vector<std::string>& argv) {
        opts.finalize(load_config(common));
        if (kg1.empty()) throw UsageError("prepare: --kg1 (or prepare.kg1) is required");
        if (!seeds.empty() && kg2.empty()) throw UsageError("prepare: --seeds needs --kg2");
        apply_env_out_dir(opts, common);

        auto inputs = checksum_inputs({kg1, kg2, seeds});
        RunContext run = begin_run("prepare", argv, opts, common);
        run.manifest.inputs = std::move(inputs);

        KnowledgeGraph graph;
        if (kg2.empty()) {
            graph = load_triples_file(kg1, KgTag::Single);
        } else {
            const KnowledgeGraph g1 = load_triples_file(kg1, KgTag::Kg1);
            const KnowledgeGraph g2 = load_triples_file(kg2, KgTag::Kg2);
            SeedAlignment seed_pairs;
            if (!seeds.empty()) seed_pairs = load_seed_pairs_file(seeds, g1, g2);
            graph = assemble_joint(g1, g2, seed_pairs);
        }
        if (reverse) graph = add_reverse_relations(graph);

        save_graph((run.dir / "graph.tsv").string(), graph);
        run.output("graph", "graph.tsv");
        run.finish();

        std::cout << "prepared graph: " << graph.entity_count() << " entities, "
                  << graph.relation_count() << " relations, " << graph.triple_count() << " triples"
                  << (graph.reversed ? " (reverse-augmented)" : "") << "\n"
                  << "checksum: " << to_hex(graph_checksum(graph)) << "\n"
                  << "wrote " << (run.dir / "graph.tsv").string() << "\n";
        return 0;
    }
};

// ---------------------------------------------------------------------------
// sample-paths

struct SamplePathsCmd {
    CLI::App* cmd;
    OptionSet opts;
    CommonOpts common;
    std::string graph_path, task;
    WalkOpts walk;

    explicit SamplePathsCmd(CLI::App& app)
        : cmd(app.add_subcommand("sample-paths", "sample biased random-walk relational paths")),
          opts(cmd) {
        opts.add_string("--graph", "sample.graph", graph_path, "prepared graph file");
        opts.add_choice("--task", "sample.task", task, {"alignment", "completion"},
                        "hyper-parameter preset; explicit flags win");
        add_walk(opts, walk, "--seed");
        add_common(opts, cmd, common);
    }

    int run(const std::vector<std::string>& argv) {
        opts.finalize(load_config(common));
        if (graph_path.empty()) throw UsageError("sample-paths: --graph is required");
        if (!task.empty()) apply_walk_preset(opts, walk, task_settings(task_from_name(task)));
        apply_env_out_dir(opts, common);

        auto inputs = checksum_inputs({graph_path});
        RunContext run = begin_run("sample-paths", argv, opts, common);
        run.manifest.inputs = std::move(inputs);
        run.manifest.seeds["walk.seed"] = walk.cfg.seed;

        const KnowledgeGraph graph = load_graph(graph_path);
        const WalkConfig cfg = resolve_walk(walk);
        const PathCorpus corpus = sample_paths(graph, cfg);

        save_corpus((run.dir / "corpus.txt").string(), corpus);
        run.output("corpus", "corpus.txt");
        run.finish();

        std::uint64_t elements = 0;
        for (const Path& p : corpus.paths) elements += p.size();
        std::cout << "sampled " << corpus.paths.size() << " paths ("
                  << (corpus.paths.empty() ? 0.0 : double(elements) / double(corpus.paths.size()))
                  << " mean elements)\n"
                  << "wrote " << (run.dir / "corpus.txt").string() << "\n";
        return 0;
    }
};

// ---------------------------------------------------------------------------
// train

struct TrainCmd {
    CLI::App* cmd;
    OptionSet opts;
    CommonOpts common;
    std::string graph_path, task, variant = "rsn", corpus_path, validate_pairs;
    std::uint32_t dim = 256, layers = 2, validate_every = 5;
    TrainConfig train;
    WalkOpts walk;

    explicit TrainCmd(CLI::App& app)
        : cmd(app.add_subcommand("train", "train embeddings over sampled relational paths")),
          opts(cmd) {
        opts.add_string("--graph", "train.graph", graph_path, "prepared graph file");
        opts.add_choice("--task", "train.task", task, {"alignment", "completion"},
                        "hyper-parameter preset; explicit flags win");
        opts.add_choice("--variant", "model.variant", variant, {"rsn", "rrn", "rnn"},
                        "recurrent variant: skip connections, residual, or plain");
        opts.add_uint32("--dim", "model.dim", dim, "embedding and hidden dimension");
        opts.add_uint32("--layers", "model.layers", layers, "recurrent layer count");
        opts.add_double("--lr", "train.learning_rate", train.learning_rate, "Adam learning rate");
        opts.add_uint32("--batch", "train.batch_size", train.batch_size, "mini-batch size");
        opts.add_uint32("--negatives", "train.negatives", train.negatives,
                        "NCE negatives per prediction position");
        opts.add_uint32("--epochs", "train.epochs", train.epochs, "training epochs");
        opts.add_double("--keep-prob", "train.keep_prob", train.keep_prob,
                        "dropout keep probability in (0,1]");
        opts.add_uint64("--seed", "train.seed", train.seed,
                        "seed for init, shuffling, dropout and negatives");
        opts.add_flag("--resample,!--no-resample", "train.resample", train.resample_corpus,
                      "sample a fresh corpus every epoch (ignored with --corpus)");
        opts.add_string("--corpus", "train.corpus", corpus_path,
                        "fixed corpus file; replaces internal walk sampling");
        opts.add_string("--validate-pairs", "train.validate_pairs", validate_pairs,
                        "alignment pairs for periodic validation; keeps the best checkpoint");
        opts.add_uint32("--validate-every", "train.validate_every", validate_every,
                        "epochs between validations");
        add_walk(opts, walk, "--walk-seed");
        add_common(opts, cmd, common);
    }

    int run(const std::vector<std::string>& argv) {
        opts.finalize(load_config(common));
        if (graph_path.empty()) throw UsageError("train: --graph is required");
        if (!task.empty()) {
            const TaskSettings ts = task_settings(task_from_name(task));
            apply_walk_preset(opts, walk, ts);
            if (opts.tunable("train.learning_rate")) {
                train.learning_rate = ts.train.learning_rate;
                opts.mark("train.learning_rate");
            }
            if (opts.tunable("train.batch_size")) {
                train.batch_size = ts.train.batch_size;
                opts.mark("train.batch_size");
            }
            if (opts.tunable("model.dim")) {
                dim = ts.dim;
                opts.mark("model.dim");
            }
            if (opts.tunable("model.layers")) {
                layers = ts.layers;
                opts.mark("model.layers");
            }
            train.preset = task_from_name(task);
        }
        apply_env_out_dir(opts, common);

        auto inputs = checksum_inputs({graph_path, corpus_path, validate_pairs});
        RunContext run = begin_run("train", argv, opts, common);
        run.manifest.inputs = std::move(inputs);
        run.manifest.seeds["train.seed"] = train.seed;
        run.manifest.seeds["walk.seed"] = walk.cfg.seed;

        const KnowledgeGraph graph = load_graph(graph_path);
        const std::uint64_t graph_sum = graph_checksum(graph);
        const NoiseDistribution noise = noise_distribution(element_frequencies(graph));
        train.validate();

        PathCorpus corpus;
        const bool fixed_corpus = !corpus_path.empty();
        if (fixed_corpus) {
            corpus = load_corpus(corpus_path);
            if (corpus.graph_checksum != graph_sum)
                throw DataError("train: stale corpus: its graph checksum " +
                                to_hex(corpus.graph_checksum) + " does not match the graph (" +
                                to_hex(graph_sum) + ")");
        }

        const AlignmentTestSet val = validate_pairs.empty()
                                         ? AlignmentTestSet{}
                                         : load_alignment_pairs(validate_pairs, graph);

        // Stream tags >= 2^32 cannot collide with train_epoch's internal
        // per-epoch streams, which use the epoch index directly.
        Rng init_rng(derive_seed(train.seed, std::uint64_t(1) << 32));
        auto model = init_model<float>(dim, layers, variant_from_name(variant),
                                       graph.entity_count(), graph.relation_count(), init_rng);
        auto adam = make_adam_state(model);

        std::ostringstream log;
        log << "epoch\tmean_loss\tseconds\tloss_positions\tpaths_seen\tval_hits1\n";
        RsnParameters<float> best = model;
        double best_hits1 = -1.0;
        std::uint32_t best_epoch = 0;

        for (std::uint32_t epoch = 0; epoch < train.epochs; ++epoch) {
            if (!fixed_corpus && (train.resample_corpus || epoch == 0)) {
                WalkConfig wc = resolve_walk(walk);
                wc.seed = train.resample_corpus
                              ? derive_seed(walk.cfg.seed, (std::uint64_t(1) << 32) + epoch)
                              : walk.cfg.seed;
                if (walk.deterministic) wc.threads = 1;
                corpus = sample_paths(graph, wc);
            }
            const LossReport rep = train_epoch(model, corpus, train, noise, adam, epoch);

            std::string val_text = "-";
            if (!val.pairs.empty() &&
                ((epoch + 1) % std::max<std::uint32_t>(1, validate_every) == 0 ||
                 epoch + 1 == train.epochs)) {
                const Mat<float> entity_rows = model.embeddings.topRows(graph.entity_count());
                const Metrics m = align_entities(entity_rows, graph.origin, val);
                val_text = format_double(m.hits1);
                if (m.hits1 > best_hits1) {
                    best_hits1 = m.hits1;
                    best = model;
                    best_epoch = epoch + 1;
                }
            }
            log << (epoch + 1) << "\t" << format_double(rep.mean_loss) << "\t"
                << format_double(rep.seconds) << "\t" << rep.loss_positions << "\t"
                << rep.paths_seen << "\t" << val_text << "\n";
            std::cout << "epoch " << (epoch + 1) << "/" << train.epochs << "  loss "
                      << format_double(rep.mean_loss)
                      << (val_text == "-" ? "" : "  val hits@1 " + val_text) << "\n";
        }

        const RsnParameters<float>& final_model = best_hits1 >= 0.0 ? best : model;
        if (best_hits1 >= 0.0)
            std::cout << "keeping epoch " << best_epoch << " (val hits@1 "
                      << format_double(best_hits1) << ")\n";

        save_checkpoint((run.dir / "model.ckpt").string(), final_model, graph_sum);
        write_text(run.dir / "training.tsv", log.str());
        run.output("checkpoint", "model.ckpt");
        run.output("training_log", "training.tsv");
        run.finish();
        std::cout << "wrote " << (run.dir / "model.ckpt").string() << "\n";
        return 0;
    }

    // Pairs of raw labels resolved against the joint vocabulary, where KG1
    // entities are prefixed "1:" and KG2 entities "2:".
    static AlignmentTestSet load_alignment_pairs(const std::string& path,
                                                 const KnowledgeGraph& graph) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open file: " + path);
        AlignmentTestSet test;
        std::string line, offenders;
        std::uint64_t line_no = 0;
        int listed = 0;
        auto offend = [&](const std::string& label) {
            if (listed < 8)
                offenders += " " + path + ":" + std::to_string(line_no) + ": " + label;
            else if (listed == 8)
                offenders += " ...";
            ++listed;
        };
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto fields = split_tabs(line);
            if (fields.size() != 2)
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": expected 2 tab-separated fields, got " +
                                std::to_string(fields.size()));
            const auto a = graph.entities.find("1:" + std::string(fields[0]));
            const auto b = graph.entities.find("2:" + std::string(fields[1]));
            if (!a) offend("1:" + std::string(fields[0]));
            if (!b) offend("2:" + std::string(fields[1]));
            if (a && b) test.pairs.emplace_back(*a, *b);
        }
        if (listed > 0) throw DataError("unknown entities in pair file:" + offenders);
        if (test.pairs.empty()) throw DataError(path + ": no pairs found");
        return test;
    }
};

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateCmd {
    CLI::App* cmd;
    OptionSet opts;
    CommonOpts common;
    std::string graph_path, checkpoint, mode, pairs, triples;
    std::string similarity = "cosine", direction = "both";
    bool objects_only = false, dump_ranks = true;
    std::uint32_t chunk = 1024;

    explicit EvaluateCmd(CLI::App& app)
        : cmd(app.add_subcommand(
              "evaluate", "score a checkpoint: entity alignment or filtered KG completion")),
          opts(cmd) {
        opts.add_string("--graph", "eval.graph", graph_path, "prepared graph file");
        opts.add_string("--checkpoint", "eval.checkpoint", checkpoint, "trained model file");
        opts.add_choice("--eval-mode", "eval.mode", mode, {"alignment", "completion"},
                        "alignment: rank counterpart entities; completion: filtered triples");
        opts.add_string("--pairs", "eval.pairs", pairs,
                        "alignment test pairs TSV 'entity1<TAB>entity2'");
        opts.add_string("--triples", "eval.triples", triples, "completion test triples TSV");
        opts.add_choice("--similarity", "eval.similarity", similarity, {"cosine", "dot"},
                        "alignment similarity");
        opts.add_choice("--direction", "eval.direction", direction, {"both", "1to2", "2to1"},
                        "alignment direction(s); both concatenates the rank lists");
        opts.add_flag("--objects-only,!--both-directions", "eval.objects_only", objects_only,
                      "completion: skip the subject-prediction direction");
        opts.add_uint32("--chunk", "eval.chunk", chunk, "completion queries per scoring block");
        opts.add_flag("--ranks,!--no-ranks", "eval.ranks", dump_ranks,
                      "write per-query ranks as CSV");
        add_common(opts, cmd, common);
    }

    int run(const std::vector<std::string>& argv) {
        opts.finalize(load_config(common));
        if (graph_path.empty()) throw UsageError("evaluate: --graph is required");
        if (checkpoint.empty()) throw UsageError("evaluate: --checkpoint is required");
        if (mode.empty()) throw UsageError("evaluate: --eval-mode is required");
        if (mode == "alignment" && pairs.empty())
            throw UsageError("evaluate: alignment mode needs --pairs");
        if (mode == "completion" && triples.empty())
            throw UsageError("evaluate: completion mode needs --triples");
        apply_env_out_dir(opts, common);

        auto inputs = checksum_inputs({graph_path, checkpoint, pairs, triples});
        RunContext run = begin_run("evaluate", argv, opts, common);
        run.manifest.inputs = std::move(inputs);

        const KnowledgeGraph graph = load_graph(graph_path);
        const auto model = load_checkpoint(checkpoint, graph_checksum(graph));

        Metrics metrics;
        std::string heading;
        if (mode == "alignment") {
            const AlignmentTestSet test = TrainCmd::load_alignment_pairs(pairs, graph);
            const Similarity sim =
                similarity == "dot" ? Similarity::Dot : Similarity::Cosine;
            const AlignDirection dir = direction == "1to2"   ? AlignDirection::OneToTwo
                                       : direction == "2to1" ? AlignDirection::TwoToOne
                                                             : AlignDirection::Both;
            const Mat<float> entity_rows = model.embeddings.topRows(graph.entity_count());
            metrics = align_entities(entity_rows, graph.origin, test, sim, dir);
            heading = "entity alignment (" + similarity + ", " + direction + ")";
        } else {
            const std::vector<Triple> test = load_test_triples(triples, graph);
            metrics = complete_triples(model, test, graph, !objects_only, chunk);
            heading = std::string("kg completion (filtered") +
                      (objects_only ? ", objects only)" : ", both directions)");
        }

        const std::string table = metrics_table(metrics, heading);
        write_text(run.dir / "metrics.txt", table);
        write_text(run.dir / "metrics.tsv", metrics_machine(metrics));
        run.output("metrics", "metrics.txt");
        run.output("metrics_machine", "metrics.tsv");
        if (dump_ranks) {
            write_text(run.dir / "ranks.csv", ranks_csv(metrics));
            run.output("ranks", "ranks.csv");
        }
        run.finish();
        std::cout << table << "wrote " << (run.dir / "metrics.txt").string() << "\n";
        return 0;
    }

    static std::vector<Triple> load_test_triples(const std::string& path,
                                                 const KnowledgeGraph& graph) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open file: " + path);
        std::vector<Triple> test;
        std::string line, offenders;
        std::uint64_t line_no = 0;
        int listed = 0;
        auto offend = [&](const std::string& label) {
            if (listed < 8)
                offenders += " " + path + ":" + std::to_string(line_no) + ": " + label;
            else if (listed == 8)
                offenders += " ...";
            ++listed;
        };
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto fields = split_tabs(line);
            if (fields.size() != 3)
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": expected 3 tab-separated fields, got " +
                                std::to_string(fields.size()));
            const auto s = graph.entities.find(fields[0]);
            const auto r = graph.relations.find(fields[1]);
            const auto o = graph.entities.find(fields[2]);
            if (!s) offend(std::string(fields[0]));
            if (!r) offend(std::string(fields[1]));
            if (!o) offend(std::string(fields[2]));
            if (s && r && o) test.push_back({*s, *r, *o});
        }
        if (listed > 0) throw DataError("unknown labels in triple file:" + offenders);
        if (test.empty()) throw DataError(path + ": no triples found");
        return test;
    }
};

// ---------------------------------------------------------------------------
// sample-dataset

struct SampleDatasetCmd {
    CLI::App* cmd;
    OptionSet opts;
    CommonOpts common;
    std::string source, mode = "normal";
    SamplingSpec spec;

    explicit SampleDatasetCmd(CLI::App& app)
        : cmd(app.add_subcommand("sample-dataset",
                                 "degree-preserving PageRank sampling of an evaluation KG")),
          opts(cmd) {
        opts.add_string("--source", "dataset.source", source, "source triples TSV");
        opts.add_uint32("--target", "dataset.target", spec.target_entities,
                        "entities in the sampled graph");
        opts.add_uint32("--groups", "dataset.groups", spec.groups, "initial degree band count");
        opts.add_double("--epsilon", "dataset.epsilon", spec.epsilon,
                        "K-S acceptance threshold in (0,1)");
        opts.add_uint32("--max-rounds", "dataset.max_rounds", spec.max_rounds,
                        "quota adjustment budget");
        opts.add_uint64("--seed", "dataset.seed", spec.seed, "sampling seed");
        opts.add_choice("--sample-mode", "dataset.mode", mode, {"normal", "dense"},
                        "dense densifies the source before sampling");
        opts.add_double("--factor", "dataset.factor", spec.dense_factor,
                        "dense mode: target average-degree multiple (>= 1)");
        opts.add_double("--damping", "dataset.damping", spec.damping, "PageRank damping");
        opts.add_uint32("--iterations", "dataset.iterations", spec.pagerank_iterations,
                        "PageRank power iterations");
        add_common(opts, cmd, common);
    }

    int run(const std::vector<std::string>& argv) {
        opts.finalize(load_config(common));
        if (source.empty()) throw UsageError("sample-dataset: --source is required");
        if (spec.target_entities == 0) throw UsageError("sample-dataset: --target is required");
        spec.mode = sample_mode_from_name(mode);
        apply_env_out_dir(opts, common);

        auto inputs = checksum_inputs({source});
        RunContext run = begin_run("sample-dataset", argv, opts, common);
        run.manifest.inputs = std::move(inputs);
        run.manifest.seeds["dataset.seed"] = spec.seed;

        const KnowledgeGraph kg = load_triples_file(source, KgTag::Single);
        const SampleResult result = sample_dataset(kg, spec);

        std::ostringstream rows;
        for (const Triple& t : result.graph.triples)
            rows << result.graph.entities.label(t.subject) << '\t'
                 << result.graph.relations.label(t.relation) << '\t'
                 << result.graph.entities.label(t.object) << '\n';
        write_text(run.dir / "sample.tsv", rows.str());
        write_text(run.dir / "sampling.jsonl", sampling_report(result, kg, spec));
        run.output("sample", "sample.tsv");
        run.output("report", "sampling.jsonl");
        run.finish();

        std::cout << (result.accepted ? "accepted" : "REJECTED (best attempt kept)")
                  << ": D = " << format_double(result.statistic.d) << " after "
                  << result.attempts.size() << " attempt(s)\n"
                  << "sample: " << result.graph.entity_count() << " entities, "
                  << result.graph.triple_count() << " triples\n"
                  << "wrote " << (run.dir / "sample.tsv").string() << "\n";
        if (!result.accepted)
            std::cerr << "warning: no attempt reached epsilon = " << format_double(spec.epsilon)
                      << "; artifacts hold the best attempt\n";
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"recurrent skipping networks over knowledge graphs"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    PrepareCmd prepare(app);
    SamplePathsCmd sample_paths_cmd(app);
    TrainCmd train(app);
    EvaluateCmd evaluate(app);
    SampleDatasetCmd sample_dataset_cmd(app);

    CLI::App* config_cmd =
        app.add_subcommand("config", "print every config key with its built-in default");
    bool dump = false;
    config_cmd->add_flag("--dump", dump, "print the defaults (also the default action)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const std::vector<std::string> raw_argv(argv, argv + argc);
    try {
        if (*prepare.cmd) return prepare.run(raw_argv);
        if (*sample_paths_cmd.cmd) return sample_paths_cmd.run(raw_argv);
        if (*train.cmd) return train.run(raw_argv);
        if (*evaluate.cmd) return evaluate.run(raw_argv);
        if (*sample_dataset_cmd.cmd) return sample_dataset_cmd.run(raw_argv);
        if (*config_cmd) {
            std::cout << "# rsnkg " << kToolVersion
                      << " defaults; every key has a matching CLI flag which overrides it.\n";
            std::set<std::string> seen;
            for (const OptionSet* set :
                 {&prepare.opts, &sample_paths_cmd.opts, &train.opts, &evaluate.opts,
                  &sample_dataset_cmd.opts})
                set->dump(std::cout, seen);
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
