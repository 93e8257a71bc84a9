#include "rsnkg/trainer.hpp"

namespace rsnkg {

const char* task_name(TaskPreset task) {
    switch (task) {
        case TaskPreset::Alignment: return "alignment";
        case TaskPreset::Completion: return "completion";
    }
    throw InternalError("task_name: unknown preset");
}

TaskPreset task_from_name(const std::string& name) {
    if (name == "alignment") return TaskPreset::Alignment;
    if (name == "completion") return TaskPreset::Completion;
    throw DataError("unknown task '" + name + "' (expected alignment or completion)");
}

void TrainConfig::validate() const {
    if (negatives < 1) throw DataError("train config: negative count must be at least 1");
    if (batch_size < 1) throw DataError("train config: batch size must be at least 1");
    if (epochs < 1) throw DataError("train config: epoch count must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw DataError("train config: learning rate must be positive");
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw DataError("train config: dropout keep probability must lie in (0, 1]");
}

TaskSettings task_settings(TaskPreset task) {
    TaskSettings s;
    s.train.preset = task;
    switch (task) {
        case TaskPreset::Alignment:
            s.train.learning_rate = 0.003;
            s.train.batch_size = 512;
            s.walk.alpha = 0.9;
            s.walk.beta = 0.9;
            s.walk.max_length = 15;
            s.walk.mode = WalkMode::CrossKg;
            break;
        case TaskPreset::Completion:
            s.train.learning_rate = 0.0001;
            s.train.batch_size = 2048;
            s.walk.alpha = 0.7;
            s.walk.max_length = 7;
            s.walk.mode = WalkMode::SingleKg;
            break;
    }
    return s;
}

std::vector<std::uint32_t> sample_negatives(std::uint32_t target, ElementType target_type,
                                            const NoiseDistribution& noise, std::uint32_t k,
                                            Rng& rng) {
    const AliasTable& table =
        target_type == ElementType::Entity ? noise.entity : noise.relation;
    if (table.size() < 2)
        throw DataError("sample_negatives: type vocabulary smaller than 2");

    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) {
        std::uint32_t candidate = 0;
        bool found = false;
        // The draw excludes only the true target; with any second element
        // of nonzero noise mass this terminates almost surely, and the cap
        // turns the degenerate all-mass-on-target case into an error.
        for (int attempt = 0; attempt < 10000; ++attempt) {
            candidate = table.sample(rng);
            if (candidate != target) {
                found = true;
                break;
            }
        }
        if (!found)
            throw DataError("sample_negatives: noise distribution has no support "
                            "besides the target");
        out.push_back(candidate);
    }
    return out;
}

}  // namespace rsnkg
