#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace trajcap::metrics {

/// Corpus-level BLEU@4 breakdown. `matched[n-1]` / `total[n-1]` are the
/// clipped n-gram hits and candidate n-gram counts summed over all videos.
struct EvalReport {
    double bleu4 = 0.0;
    int n_videos = 0;
    std::array<long long, 4> matched{};
    std::array<long long, 4> total{};
    std::array<double, 4> precisions{};
    long long candidate_length = 0;
    long long reference_length = 0;  // sum of closest-reference lengths
    double brevity_penalty = 1.0;
};

/// Corpus BLEU@4 with clipped modified precision, closest-reference-length
/// brevity penalty (ties prefer the shorter reference), and no smoothing:
/// any zero precision makes the score 0. Every candidate must have at least
/// one reference; extra reference entries are ignored.
EvalReport bleu4(const std::map<std::string, std::vector<std::string>>& candidates,
                 const std::map<std::string, std::vector<std::vector<std::string>>>& references);

}  // namespace trajcap::metrics
