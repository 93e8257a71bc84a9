#include "rsnkg/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace rsnkg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

PathBatch pack_paths(const std::vector<Path>& paths, std::size_t first, std::size_t count,
                     std::uint32_t entity_count, std::uint32_t relation_count) {
    if (count == 0 || first + count > paths.size()) throw DataError("pack_paths: bad slice");
    const std::size_t T = paths[first].size();
    PathBatch b;
    b.batch = static_cast<std::uint32_t>(count);
    b.length = static_cast<std::uint32_t>(T);
    b.rows.resize(T * count);
    for (std::size_t i = 0; i < count; ++i) {
        const Path& p = paths[first + i];
        if (p.size() != T) throw DataError("pack_paths: mixed path lengths in one batch");
        for (std::size_t t = 0; t < T; ++t) {
            std::uint32_t id = p[t];
            if (t % 2 == 0) {
                if (id >= entity_count) throw DataError("path entity id outside the vocabulary");
                b.rows[t * count + i] = id;
            } else {
                if (id >= relation_count) throw DataError("path relation id outside the vocabulary");
                b.rows[t * count + i] = entity_count + id;
            }
        }
    }
    return b;
}

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'S', 'N', 'K', 'G', 'C', 'P', '1'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError(std::string("checkpoint truncated at ") + what);
    return v;
}

std::uint64_t read_u64(std::istream& in, const char* what) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 8)) throw DataError(std::string("checkpoint truncated at ") + what);
    return v;
}

void write_block(std::ostream& out, const Mat<float>& m) {
    out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(float)) * m.size());
}

void read_block(std::istream& in, Mat<float>& m, const std::string& name) {
    if (!in.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(float)) * m.size()))
        throw DataError("checkpoint truncated in block " + name);
}

}  // namespace

void save_checkpoint(const std::string& path, const RsnParameters<float>& params,
                     std::uint64_t graph_checksum) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(out, params.dim);
    write_u32(out, params.layer_count);
    write_u32(out, params.entity_count);
    write_u32(out, params.relation_count);
    write_u32(out, static_cast<std::uint32_t>(params.variant));
    write_u64(out, graph_checksum);
    params.for_each_parameter([&](const std::string&, const Mat<float>& m) { write_block(out, m); });
    write_block(out, params.bn_in.running_mean);
    write_block(out, params.bn_in.running_var);
    write_block(out, params.bn_out.running_mean);
    write_block(out, params.bn_out.running_var);
    if (!out) throw DataError("write failed: " + path);
}

namespace {

struct CheckpointHeader {
    std::uint32_t dim, layer_count, entity_count, relation_count, variant;
    std::uint64_t graph_checksum;
};

CheckpointHeader read_header(std::istream& in, const std::string& path) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError(path + ": not a checkpoint file");
    CheckpointHeader h;
    h.dim = read_u32(in, "dim");
    h.layer_count = read_u32(in, "layer count");
    h.entity_count = read_u32(in, "entity count");
    h.relation_count = read_u32(in, "relation count");
    h.variant = read_u32(in, "variant");
    h.graph_checksum = read_u64(in, "graph checksum");
    if (h.dim == 0 || h.layer_count == 0 || h.entity_count == 0 || h.relation_count == 0 ||
        h.variant > 2)
        throw DataError(path + ": corrupt checkpoint header");
    return h;
}

}  // namespace

RsnParameters<float> load_checkpoint(const std::string& path, std::uint64_t expected_graph_checksum) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    CheckpointHeader h = read_header(in, path);
    if (expected_graph_checksum != 0 && h.graph_checksum != expected_graph_checksum)
        throw DataError(path + ": checkpoint was trained on a different graph (checksum mismatch)");

    RsnParameters<float> p;
    p.dim = h.dim;
    p.layer_count = h.layer_count;
    p.entity_count = h.entity_count;
    p.relation_count = h.relation_count;
    p.variant = static_cast<ModelVariant>(h.variant);
    p.embeddings.resize(p.vocab_size(), p.dim);
    p.layers.resize(p.layer_count);
    for (auto& layer : p.layers) {
        layer.w_x.resize(p.dim, 4 * p.dim);
        layer.w_h.resize(p.dim, 4 * p.dim);
        layer.bias.resize(1, 4 * p.dim);
    }
    p.s1.resize(p.dim, p.dim);
    p.s2.resize(p.dim, p.dim);
    for (BatchNorm<float>* bn : {&p.bn_in, &p.bn_out}) {
        bn->gamma.resize(1, p.dim);
        bn->beta.resize(1, p.dim);
        bn->running_mean.resize(1, p.dim);
        bn->running_var.resize(1, p.dim);
    }
    p.for_each_parameter([&](const std::string& name, Mat<float>& m) { read_block(in, m, name); });
    read_block(in, p.bn_in.running_mean, "bn_in.running_mean");
    read_block(in, p.bn_in.running_var, "bn_in.running_var");
    read_block(in, p.bn_out.running_mean, "bn_out.running_mean");
    read_block(in, p.bn_out.running_var, "bn_out.running_var");
    char extra;
    if (in.read(&extra, 1)) throw DataError(path + ": trailing bytes after checkpoint payload");
    return p;
}

std::uint64_t checkpoint_graph_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return read_header(in, path).graph_checksum;
}

}  // namespace rsnkg
