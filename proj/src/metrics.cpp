#include "trajcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace trajcap::metrics {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, long long> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::map<Ngram, long long> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[Ngram(tokens.begin() + static_cast<long>(i),
                       tokens.begin() + static_cast<long>(i) + n)];
    return counts;
}

}  // namespace

EvalReport bleu4(const std::map<std::string, std::vector<std::string>>& candidates,
                 const std::map<std::string, std::vector<std::vector<std::string>>>& references) {
    EvalReport report;
    report.n_videos = static_cast<int>(candidates.size());

    for (const auto& [video_id, candidate] : candidates) {
        auto it = references.find(video_id);
        if (it == references.end() || it->second.empty())
            throw std::invalid_argument("no references for video: " + video_id);
        const auto& refs = it->second;

        long long c = static_cast<long long>(candidate.size());
        report.candidate_length += c;
        long long best_ref = static_cast<long long>(refs.front().size());
        for (const auto& ref : refs) {
            long long r = static_cast<long long>(ref.size());
            if (std::llabs(r - c) < std::llabs(best_ref - c) ||
                (std::llabs(r - c) == std::llabs(best_ref - c) && r < best_ref))
                best_ref = r;
        }
        report.reference_length += best_ref;

        for (int n = 1; n <= 4; ++n) {
            auto cand_grams = ngram_counts(candidate, n);
            std::map<Ngram, long long> ref_max;
            for (const auto& ref : refs)
                for (const auto& [gram, count] : ngram_counts(ref, n))
                    ref_max[gram] = std::max(ref_max[gram], count);
            for (const auto& [gram, count] : cand_grams) {
                report.total[n - 1] += count;
                auto hit = ref_max.find(gram);
                if (hit != ref_max.end())
                    report.matched[n - 1] += std::min(count, hit->second);
            }
        }
    }

    bool any_zero = false;
    for (int n = 0; n < 4; ++n) {
        report.precisions[n] =
            report.total[n] > 0
                ? static_cast<double>(report.matched[n]) / static_cast<double>(report.total[n])
                : 0.0;
        if (report.precisions[n] == 0.0) any_zero = true;
    }

    if (report.candidate_length == 0) {
        report.brevity_penalty = 0.0;
    } else if (report.candidate_length >= report.reference_length) {
        report.brevity_penalty = 1.0;
    } else {
        report.brevity_penalty =
            std::exp(1.0 - static_cast<double>(report.reference_length) /
                               static_cast<double>(report.candidate_length));
    }

    if (!any_zero) {
        double log_mean = 0.0;
        for (double p : report.precisions) log_mean += std::log(p);
        report.bleu4 = report.brevity_penalty * std::exp(log_mean / 4.0);
    }
    return report;
}

}  // namespace trajcap::metrics
