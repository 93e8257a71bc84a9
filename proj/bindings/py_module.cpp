#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "rsnkg/config.hpp"
#include "rsnkg/evaluator.hpp"
#include "rsnkg/graph_io.hpp"
#include "rsnkg/kg.hpp"
#include "rsnkg/model.hpp"
#include "rsnkg/srprs.hpp"
#include "rsnkg/trainer.hpp"
#include "rsnkg/walker.hpp"

namespace py = pybind11;
using namespace rsnkg;

namespace {

using ModelF = RsnParameters<float>;

KgTag tag_from_string(const std::string& tag) {
    if (tag == "single") return KgTag::Single;
    if (tag == "kg1") return KgTag::Kg1;
    if (tag == "kg2") return KgTag::Kg2;
    throw DataError("unknown graph tag: " + tag + " (use single, kg1 or kg2)");
}

py::array_t<float> matrix_to_numpy(const Mat<float>& m) {
    py::array_t<float> arr({py::ssize_t(m.rows()), py::ssize_t(m.cols())});
    std::memcpy(arr.mutable_data(), m.data(), sizeof(float) * std::size_t(m.size()));
    return arr;
}

py::dict metrics_to_dict(const Metrics& m) {
    py::dict d;
    d["hits1"] = m.hits1;
    d["hits10"] = m.hits10;
    d["mrr"] = m.mrr;
    d["ranks"] = m.ranks;
    return d;
}

SeedAlignment resolve_seeds(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                            const std::vector<std::pair<std::string, std::string>>& pairs) {
    SeedAlignment seeds;
    for (const auto& [a, b] : pairs) {
        const auto e1 = kg1.entities.find(a);
        const auto e2 = kg2.entities.find(b);
        if (!e1) throw DataError("unknown entity in first graph: " + a);
        if (!e2) throw DataError("unknown entity in second graph: " + b);
        seeds.pairs.emplace_back(*e1, *e2);
    }
    return seeds;
}

AlignmentTestSet resolve_test_pairs(const KnowledgeGraph& joint,
                                    const std::vector<std::pair<std::string, std::string>>& pairs) {
    AlignmentTestSet test;
    for (const auto& [a, b] : pairs) {
        const auto e1 = joint.entities.find("1:" + a);
        const auto e2 = joint.entities.find("2:" + b);
        if (!e1) throw DataError("unknown KG1 entity: " + a);
        if (!e2) throw DataError("unknown KG2 entity: " + b);
        test.pairs.emplace_back(*e1, *e2);
    }
    return test;
}

std::vector<Triple> resolve_triples(
    const KnowledgeGraph& kg,
    const std::vector<std::tuple<std::string, std::string, std::string>>& rows) {
    std::vector<Triple> out;
    for (const auto& [s, r, o] : rows) {
        const auto si = kg.entities.find(s);
        const auto ri = kg.relations.find(r);
        const auto oi = kg.entities.find(o);
        if (!si) throw DataError("unknown entity: " + s);
        if (!ri) throw DataError("unknown relation: " + r);
        if (!oi) throw DataError("unknown entity: " + o);
        out.push_back({*si, *ri, *oi});
    }
    return out;
}

// Mirrors the CLI's training loop, including its seed streams, so the same
// settings reproduce the same checkpoint through either surface.
std::pair<ModelF, std::vector<double>> train_model(
    const KnowledgeGraph& kg, std::optional<std::string> task, const std::string& variant,
    std::optional<std::uint32_t> dim, std::optional<std::uint32_t> layers,
    std::optional<double> lr, std::optional<std::uint32_t> batch, std::uint32_t negatives,
    std::uint32_t epochs, double keep_prob, std::uint64_t seed, bool resample,
    std::optional<PathCorpus> corpus, std::optional<WalkConfig> walk) {
    TrainConfig cfg;
    cfg.negatives = negatives;
    cfg.epochs = epochs;
    cfg.keep_prob = keep_prob;
    cfg.seed = seed;
    cfg.resample_corpus = resample;

    WalkConfig wc = walk.value_or(WalkConfig{});
    std::uint32_t model_dim = 256, model_layers = 2;
    if (task) {
        const TaskSettings ts = task_settings(task_from_name(*task));
        cfg.preset = ts.train.preset;
        cfg.learning_rate = ts.train.learning_rate;
        cfg.batch_size = ts.train.batch_size;
        model_dim = ts.dim;
        model_layers = ts.layers;
        if (!walk) wc = ts.walk;
    }
    if (lr) cfg.learning_rate = *lr;
    if (batch) cfg.batch_size = *batch;
    if (dim) model_dim = *dim;
    if (layers) model_layers = *layers;
    cfg.validate();

    if (corpus && corpus->graph_checksum != graph_checksum(kg))
        throw DataError("stale corpus: its graph checksum does not match the graph");

    const NoiseDistribution noise = noise_distribution(element_frequencies(kg));
    Rng init_rng(derive_seed(cfg.seed, std::uint64_t(1) << 32));
    ModelF model = init_model<float>(model_dim, model_layers, variant_from_name(variant),
                                     kg.entity_count(), kg.relation_count(), init_rng);
    auto adam = make_adam_state(model);

    std::string walk_warning;
    wc.validate(&walk_warning);
    if (!walk_warning.empty()) py::module_::import("warnings").attr("warn")(walk_warning);

    std::vector<double> losses;
    PathCorpus epoch_corpus;
    {
        py::gil_scoped_release release;
        for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            const PathCorpus* active = corpus ? &*corpus : &epoch_corpus;
            if (!corpus && (cfg.resample_corpus || epoch == 0)) {
                WalkConfig wce = wc;
                wce.seed = cfg.resample_corpus
                               ? derive_seed(wc.seed, (std::uint64_t(1) << 32) + epoch)
                               : wc.seed;
                epoch_corpus = sample_paths(kg, wce);
            }
            losses.push_back(train_epoch(model, *active, cfg, noise, adam, epoch).mean_loss);
        }
    }
    return {std::move(model), std::move(losses)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "recurrent skipping networks over knowledge graphs";
    m.attr("__version__") = kToolVersion;

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<InternalError>(m, "InternalError");

    py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
        .def_property_readonly("entity_count", &KnowledgeGraph::entity_count)
        .def_property_readonly("relation_count", &KnowledgeGraph::relation_count)
        .def_property_readonly("triple_count", &KnowledgeGraph::triple_count)
        .def_readonly("reversed", &KnowledgeGraph::reversed)
        .def("entity_label",
             [](const KnowledgeGraph& kg, EntityId e) { return kg.entities.label(e); })
        .def("relation_label",
             [](const KnowledgeGraph& kg, RelationId r) { return kg.relations.label(r); })
        .def("find_entity",
             [](const KnowledgeGraph& kg, const std::string& label) {
                 return kg.entities.find(label);
             })
        .def("find_relation",
             [](const KnowledgeGraph& kg, const std::string& label) {
                 return kg.relations.find(label);
             })
        .def("triples",
             [](const KnowledgeGraph& kg) {
                 std::vector<std::tuple<EntityId, RelationId, EntityId>> out;
                 out.reserve(kg.triples.size());
                 for (const Triple& t : kg.triples) out.emplace_back(t.subject, t.relation, t.object);
                 return out;
             })
        .def("__repr__", [](const KnowledgeGraph& kg) {
            return "<KnowledgeGraph: " + std::to_string(kg.entity_count()) + " entities, " +
                   std::to_string(kg.relation_count()) + " relations, " +
                   std::to_string(kg.triple_count()) + " triples>";
        });

    m.def(
        "load_triples",
        [](const std::string& path, const std::string& tag) {
            return load_triples_file(path, tag_from_string(tag));
        },
        py::arg("path"), py::arg("tag") = "single",
        "Load a 'subject<TAB>relation<TAB>object' file.");
    m.def("load_graph", &load_graph, py::arg("path"));
    m.def("save_graph", &save_graph, py::arg("path"), py::arg("graph"));
    m.def("graph_checksum", &graph_checksum, py::arg("graph"));
    m.def("add_reverse_relations", &add_reverse_relations, py::arg("graph"));
    m.def(
        "assemble_joint",
        [](const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
           const std::vector<std::pair<std::string, std::string>>& seeds) {
            return assemble_joint(kg1, kg2, resolve_seeds(kg1, kg2, seeds));
        },
        py::arg("kg1"), py::arg("kg2"), py::arg("seeds"),
        "Merge two graphs; seeds are (kg1_label, kg2_label) pairs whose triples are copied "
        "across.");

    py::class_<WalkConfig>(m, "WalkConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &WalkConfig::alpha)
        .def_readwrite("beta", &WalkConfig::beta)
        .def_readwrite("rounds", &WalkConfig::rounds)
        .def_readwrite("max_length", &WalkConfig::max_length)
        .def_readwrite("seed", &WalkConfig::seed)
        .def_readwrite("threads", &WalkConfig::threads)
        .def_readwrite("start_on_originals", &WalkConfig::start_on_originals)
        .def_property(
            "mode",
            [](const WalkConfig& c) {
                return c.mode == WalkMode::CrossKg ? std::string("cross") : std::string("single");
            },
            [](WalkConfig& c, const std::string& mode) {
                if (mode == "cross")
                    c.mode = WalkMode::CrossKg;
                else if (mode == "single")
                    c.mode = WalkMode::SingleKg;
                else
                    throw DataError("unknown walk mode: " + mode + " (use cross or single)");
            });

    py::class_<PathCorpus>(m, "PathCorpus")
        .def_readonly("config", &PathCorpus::config)
        .def_readonly("graph_checksum", &PathCorpus::graph_checksum)
        .def("__len__", [](const PathCorpus& c) { return c.paths.size(); })
        .def("paths", [](const PathCorpus& c) { return c.paths; });

    m.def(
        "sample_paths",
        [](const KnowledgeGraph& kg, WalkConfig cfg) {
            std::string warning;
            cfg.validate(&warning);
            if (!warning.empty()) py::module_::import("warnings").attr("warn")(warning);
            py::gil_scoped_release release;
            return sample_paths(kg, cfg);
        },
        py::arg("graph"), py::arg("config") = WalkConfig{});
    m.def("save_corpus", &save_corpus, py::arg("path"), py::arg("corpus"));
    m.def("load_corpus", &load_corpus, py::arg("path"));

    py::class_<ModelF>(m, "Model")
        .def_readonly("dim", &ModelF::dim)
        .def_readonly("entity_count", &ModelF::entity_count)
        .def_readonly("relation_count", &ModelF::relation_count)
        .def_property_readonly("layers", [](const ModelF& p) { return p.layer_count; })
        .def_property_readonly("variant",
                               [](const ModelF& p) { return std::string(variant_name(p.variant)); })
        .def("embeddings", [](const ModelF& p) { return matrix_to_numpy(p.embeddings); },
             "Full embedding table: entity rows first, then relations.")
        .def("entity_embeddings",
             [](const ModelF& p) {
                 const Mat<float> rows = p.embeddings.topRows(p.entity_count);
                 return matrix_to_numpy(rows);
             })
        .def("save",
             [](const ModelF& p, const std::string& path, std::uint64_t graph_checksum) {
                 save_checkpoint(path, p, graph_checksum);
             },
             py::arg("path"), py::arg("graph_checksum"))
        .def("__repr__", [](const ModelF& p) {
            return "<Model " + std::string(variant_name(p.variant)) + ": dim " +
                   std::to_string(p.dim) + ", " + std::to_string(p.layer_count) + " layers, " +
                   std::to_string(p.vocab_size()) + " embeddings>";
        });

    m.def("load_checkpoint", &load_checkpoint, py::arg("path"),
          py::arg("expected_graph_checksum") = 0,
          "Load a trained model; a nonzero checksum must match the one stored.");

    m.def("train", &train_model, py::arg("graph"), py::arg("task") = py::none(),
          py::arg("variant") = "rsn", py::arg("dim") = py::none(), py::arg("layers") = py::none(),
          py::arg("lr") = py::none(), py::arg("batch") = py::none(), py::arg("negatives") = 10,
          py::arg("epochs") = 30, py::arg("keep_prob") = 0.5, py::arg("seed") = 1,
          py::arg("resample") = true, py::arg("corpus") = py::none(),
          py::arg("walk") = py::none(),
          "Train embeddings; returns (model, per-epoch mean losses). Explicit arguments "
          "override the task preset.");

    m.def(
        "align",
        [](const ModelF& model, const KnowledgeGraph& joint,
           const std::vector<std::pair<std::string, std::string>>& pairs,
           const std::string& similarity, const std::string& direction) {
            const Similarity sim = similarity == "dot" ? Similarity::Dot : Similarity::Cosine;
            const AlignDirection dir = direction == "1to2"   ? AlignDirection::OneToTwo
                                       : direction == "2to1" ? AlignDirection::TwoToOne
                                                             : AlignDirection::Both;
            if (similarity != "dot" && similarity != "cosine")
                throw DataError("unknown similarity: " + similarity);
            if (direction != "both" && direction != "1to2" && direction != "2to1")
                throw DataError("unknown direction: " + direction);
            const Mat<float> entity_rows = model.embeddings.topRows(joint.entity_count());
            return metrics_to_dict(
                align_entities(entity_rows, joint.origin, resolve_test_pairs(joint, pairs), sim,
                               dir));
        },
        py::arg("model"), py::arg("graph"), py::arg("pairs"), py::arg("similarity") = "cosine",
        py::arg("direction") = "both",
        "Entity alignment metrics over (kg1_label, kg2_label) test pairs.");

    m.def(
        "complete",
        [](const ModelF& model, const KnowledgeGraph& kg,
           const std::vector<std::tuple<std::string, std::string, std::string>>& rows,
           bool subjects, std::uint32_t chunk) {
            const std::vector<Triple> test = resolve_triples(kg, rows);
            Metrics result;
            {
                py::gil_scoped_release release;
                result = complete_triples(model, test, kg, subjects, chunk);
            }
            return metrics_to_dict(result);
        },
        py::arg("model"), py::arg("graph"), py::arg("triples"), py::arg("subjects") = true,
        py::arg("chunk") = 1024,
        "Filtered completion metrics over (subject, relation, object) label triples.");

    m.def(
        "sample_dataset",
        [](const KnowledgeGraph& kg, std::uint32_t target, std::uint32_t groups, double epsilon,
           std::uint32_t max_rounds, std::uint64_t seed, const std::string& mode, double factor,
           double damping, std::uint32_t iterations) {
            SamplingSpec spec;
            spec.target_entities = target;
            spec.groups = groups;
            spec.epsilon = epsilon;
            spec.max_rounds = max_rounds;
            spec.seed = seed;
            spec.mode = sample_mode_from_name(mode);
            spec.dense_factor = factor;
            spec.damping = damping;
            spec.pagerank_iterations = iterations;
            SampleResult result;
            {
                py::gil_scoped_release release;
                result = sample_dataset(kg, spec);
            }
            py::dict report;
            report["d"] = result.statistic.d;
            report["accepted"] = result.accepted;
            report["attempts"] = result.attempts.size();
            return py::make_tuple(result.graph, report);
        },
        py::arg("graph"), py::arg("target"), py::arg("groups") = 10, py::arg("epsilon") = 0.05,
        py::arg("max_rounds") = 20, py::arg("seed") = 1, py::arg("mode") = "normal",
        py::arg("factor") = 2.0, py::arg("damping") = 0.85, py::arg("iterations") = 50,
        "Degree-preserving PageRank sample; returns (graph, report dict).");

    m.def("densify", &densify, py::arg("graph"), py::arg("factor") = 2.0, py::arg("seed") = 1);
}
