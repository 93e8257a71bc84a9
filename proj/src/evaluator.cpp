#include "rsnkg/evaluator.hpp"

#include <cmath>
#include <cstdio>

namespace rsnkg {

namespace {

void check_ranks(const std::vector<std::uint32_t>& ranks) {
    if (ranks.empty()) throw DataError("metrics: empty rank list");
    for (auto r : ranks)
        if (r < 1) throw DataError("metrics: ranks are 1-based, found 0");
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

double hits_at_k(const std::vector<std::uint32_t>& ranks, std::uint32_t k) {
    check_ranks(ranks);
    std::size_t hits = 0;
    for (auto r : ranks)
        if (r <= k) ++hits;
    return double(hits) / double(ranks.size());
}

double mrr(const std::vector<std::uint32_t>& ranks) {
    check_ranks(ranks);
    double sum = 0.0;
    for (auto r : ranks) sum += 1.0 / double(r);
    return sum / double(ranks.size());
}

Metrics summarize(std::vector<std::uint32_t> ranks) {
    Metrics m;
    m.hits1 = hits_at_k(ranks, 1);
    m.hits10 = hits_at_k(ranks, 10);
    m.mrr = mrr(ranks);
    m.ranks = std::move(ranks);
    return m;
}

std::string metrics_table(const Metrics& m, const std::string& heading) {
    std::string out;
    out += heading + "\n";
    out += "  metric   value\n";
    out += "  hits@1   " + format_value(m.hits1) + "\n";
    out += "  hits@10  " + format_value(m.hits10) + "\n";
    out += "  mrr      " + format_value(m.mrr) + "\n";
    out += "  queries  " + std::to_string(m.ranks.size()) + "\n";
    return out;
}

std::string metrics_machine(const Metrics& m) {
    std::string out;
    out += "hits@1\t" + format_value(m.hits1) + "\n";
    out += "hits@10\t" + format_value(m.hits10) + "\n";
    out += "mrr\t" + format_value(m.mrr) + "\n";
    out += "queries\t" + std::to_string(m.ranks.size()) + "\n";
    return out;
}

std::string ranks_csv(const Metrics& m) {
    std::string out = "query,rank\n";
    for (std::size_t i = 0; i < m.ranks.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(m.ranks[i]) + "\n";
    return out;
}

}  // namespace rsnkg
