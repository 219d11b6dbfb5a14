#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tactile/mapping.hpp"
#include "tactile/timeline.hpp"

namespace tactile::eval {

using mapping::HapticTimeline;

struct TrialRecord {
    std::string participant_id;
    std::string presented;
    std::string answered;
    std::optional<int> confidence;  // 1-10 when present
    bool trained = false;
};

struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<int>> counts;  // rows = presented, cols = answered

    explicit ConfusionMatrix(std::vector<std::string> l = {})
        : labels(std::move(l)),
          counts(labels.size(), std::vector<int>(labels.size(), 0)) {}

    int label_index(const std::string& label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) throw std::out_of_range("unknown label: " + label);
        return (int)(it - labels.begin());
    }

    void add(const std::string& presented, const std::string& answered, int n = 1) {
        counts[label_index(presented)][label_index(answered)] += n;
    }

    int row_sum(int i) const {
        int s = 0;
        for (int v : counts[i]) s += v;
        return s;
    }
    int col_sum(int j) const {
        int s = 0;
        for (const auto& row : counts) s += row[j];
        return s;
    }
    int total() const {
        int s = 0;
        for (size_t i = 0; i < counts.size(); ++i) s += row_sum((int)i);
        return s;
    }
};

/// One rhythm token: a gesture's representative site plus the 10 ms
/// quantized interval since the previous gesture onset (0 for the first).
struct FingerprintToken {
    uint8_t site_id;
    uint32_t ioi_bin;

    bool operator==(const FingerprintToken&) const = default;
};

using Fingerprint = std::vector<FingerprintToken>;

inline constexpr double kIoiBinSeconds = 0.010;

inline uint32_t quantize_ioi(double seconds) {
    return (uint32_t)std::lround(std::max(seconds, 0.0) / kIoiBinSeconds);
}

/// Gesture onsets from a timeline: one token per gesture_id, ordered by
/// onset, site taken from the gesture's first event.
inline Fingerprint fingerprint(const HapticTimeline& timeline) {
    struct Onset {
        double t;
        uint8_t site;
    };
    std::map<uint32_t, Onset> gestures;
    for (const auto& e : timeline.events) {
        auto it = gestures.find(e.gesture_id);
        if (it == gestures.end() || e.t_on < it->second.t)
            gestures[e.gesture_id] = {e.t_on, layout::site_id(e.site)};
    }
    std::vector<Onset> ordered;
    ordered.reserve(gestures.size());
    for (auto& [id, onset] : gestures) ordered.push_back(onset);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Onset& a, const Onset& b) { return a.t < b.t; });

    Fingerprint fp;
    fp.reserve(ordered.size());
    for (size_t i = 0; i < ordered.size(); ++i) {
        double ioi = i == 0 ? 0.0 : ordered[i].t - ordered[i - 1].t;
        fp.push_back({ordered[i].site, quantize_ioi(ioi)});
    }
    return fp;
}

/// Fingerprint from a device-command stream: every rising edge
/// (site off -> on) counts as a gesture onset.
inline Fingerprint fingerprint_from_commands(
    const std::vector<timeline::DeviceCommand>& commands) {
    std::array<uint8_t, layout::kSiteCount> level{};
    struct Onset {
        double t;
        uint8_t site;
    };
    std::vector<Onset> onsets;
    for (const auto& cmd : commands) {
        uint8_t id = layout::site_id(cmd.site);
        if (level[id] == 0 && cmd.intensity > 0) onsets.push_back({cmd.t, id});
        level[id] = cmd.intensity;
    }
    Fingerprint fp;
    fp.reserve(onsets.size());
    for (size_t i = 0; i < onsets.size(); ++i) {
        double ioi = i == 0 ? 0.0 : onsets[i].t - onsets[i - 1].t;
        fp.push_back({onsets[i].site, quantize_ioi(ioi)});
    }
    return fp;
}

namespace detail {

inline size_t levenshtein(const Fingerprint& a, const Fingerprint& b) {
    std::vector<size_t> prev(b.size() + 1), curr(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        curr[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

}  // namespace detail

/// Normalized edit distance over fingerprint tokens; 0 for identical
/// sequences, 1 for nothing in common.
inline double fingerprint_distance(const Fingerprint& a, const Fingerprint& b) {
    size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 0.0;
    return (double)detail::levenshtein(a, b) / (double)longest;
}

struct IdentifyResult {
    std::string label;
    double score;  // 1 - normalized distance
};

/// Nearest candidate by normalized edit distance; ties go to the
/// lexicographically smallest label.
inline IdentifyResult identify(const Fingerprint& query,
                               const std::map<std::string, Fingerprint>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("no candidates");
    IdentifyResult best{"", -1.0};
    for (const auto& [label, fp] : candidates) {
        double score = 1.0 - fingerprint_distance(query, fp);
        if (score > best.score) best = {label, score};
        // map iteration is label-ordered, so equal scores keep the first
    }
    return best;
}

struct PrecisionRecall {
    std::optional<double> precision;  // empty when no answers picked this label
    std::optional<double> recall;     // empty when the label was never presented
};

inline std::vector<PrecisionRecall> precision_recall(const ConfusionMatrix& matrix) {
    std::vector<PrecisionRecall> out(matrix.labels.size());
    for (size_t l = 0; l < matrix.labels.size(); ++l) {
        int col = matrix.col_sum((int)l);
        int row = matrix.row_sum((int)l);
        int correct = matrix.counts[l][l];
        if (col > 0) out[l].precision = (double)correct / col;
        if (row > 0) out[l].recall = (double)correct / row;
    }
    return out;
}

struct GroupStats {
    int trials = 0;
    int correct = 0;
    std::optional<double> accuracy;
    std::optional<double> mean_confidence;
};

struct CohortStats {
    std::map<std::string, GroupStats> per_participant;
    GroupStats trained;
    GroupStats untrained;
};

inline CohortStats accuracy_by_group(const std::vector<TrialRecord>& trials) {
    CohortStats stats;
    std::map<std::string, double> conf_sum_p;
    std::map<std::string, int> conf_n_p;
    double conf_sum[2] = {0, 0};
    int conf_n[2] = {0, 0};
    for (const auto& t : trials) {
        bool correct = t.presented == t.answered;
        auto& p = stats.per_participant[t.participant_id];
        p.trials++;
        p.correct += correct;
        GroupStats& g = t.trained ? stats.trained : stats.untrained;
        g.trials++;
        g.correct += correct;
        if (t.confidence) {
            conf_sum_p[t.participant_id] += *t.confidence;
            conf_n_p[t.participant_id]++;
            conf_sum[t.trained] += *t.confidence;
            conf_n[t.trained]++;
        }
    }
    for (auto& [id, p] : stats.per_participant) {
        p.accuracy = (double)p.correct / p.trials;
        if (conf_n_p[id] > 0) p.mean_confidence = conf_sum_p[id] / conf_n_p[id];
    }
    auto finish = [&](GroupStats& g, int trained) {
        if (g.trials > 0) g.accuracy = (double)g.correct / g.trials;
        if (conf_n[trained] > 0) g.mean_confidence = conf_sum[trained] / conf_n[trained];
    };
    finish(stats.trained, 1);
    finish(stats.untrained, 0);
    return stats;
}

namespace detail {

inline bool rounds_to(int num, int den, double target) {
    if (den == 0) return false;
    long hundredths = std::lround(100.0 * num / den);
    return hundredths == std::lround(target * 100.0);
}

}  // namespace detail

/// Exhaustively enumerates 3x3 confusion matrices with the given trial
/// total whose per-label precision/recall round (2 decimals) to the
/// targets. An empty result means the targets are infeasible at that
/// total, which is itself a finding.
inline std::vector<ConfusionMatrix> table1_consistency(
    const std::array<std::pair<double, double>, 3>& targets,  // (precision, recall)
    int total_trials, const std::vector<std::string>& labels = {"Song 1", "Song 2", "Song 3"}) {
    if (total_trials > 200) throw std::invalid_argument("total_trials bound is 200");
    std::vector<ConfusionMatrix> results;

    // candidate (diagonal, row sum) pairs satisfying each recall target
    std::array<std::vector<std::pair<int, int>>, 3> row_options;
    for (int l = 0; l < 3; ++l)
        for (int row = 1; row <= total_trials; ++row)
            for (int d = 0; d <= row; ++d)
                if (detail::rounds_to(d, row, targets[l].second))
                    row_options[l].emplace_back(d, row);

    for (auto [d0, r0] : row_options[0]) {
        for (auto [d1, r1] : row_options[1]) {
            if (r0 + r1 > total_trials) continue;
            for (auto [d2, r2] : row_options[2]) {
                if (r0 + r1 + r2 != total_trials) continue;
                // off-diagonals: x01 + x02 = r0-d0, etc.
                for (int x01 = 0; x01 <= r0 - d0; ++x01) {
                    int x02 = r0 - d0 - x01;
                    for (int x10 = 0; x10 <= r1 - d1; ++x10) {
                        int x12 = r1 - d1 - x10;
                        for (int x20 = 0; x20 <= r2 - d2; ++x20) {
                            int x21 = r2 - d2 - x20;
                            int c0 = d0 + x10 + x20;
                            int c1 = d1 + x01 + x21;
                            int c2 = d2 + x02 + x12;
                            if (!detail::rounds_to(d0, c0, targets[0].first)) continue;
                            if (!detail::rounds_to(d1, c1, targets[1].first)) continue;
                            if (!detail::rounds_to(d2, c2, targets[2].first)) continue;
                            ConfusionMatrix m(labels);
                            m.counts = {{d0, x01, x02}, {x10, d1, x12}, {x20, x21, d2}};
                            results.push_back(std::move(m));
                        }
                    }
                }
            }
        }
    }
    return results;
}

class TrialsParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Trials CSV: header `participant,presented,answered,confidence,trained`,
/// one record per line; confidence may be blank.
inline std::vector<TrialRecord> read_trials_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw TrialsParseError("empty trials file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "participant,presented,answered,confidence,trained")
        throw TrialsParseError("unexpected CSV header: " + line);
    std::vector<TrialRecord> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 5)
            throw TrialsParseError("expected 5 fields on line " + std::to_string(lineno));
        TrialRecord rec;
        rec.participant_id = fields[0];
        rec.presented = fields[1];
        rec.answered = fields[2];
        if (!fields[3].empty()) {
            int c = std::stoi(fields[3]);
            if (c < 1 || c > 10)
                throw TrialsParseError("confidence out of 1-10 on line " +
                                       std::to_string(lineno));
            rec.confidence = c;
        }
        if (fields[4] == "true" || fields[4] == "1")
            rec.trained = true;
        else if (fields[4] == "false" || fields[4] == "0")
            rec.trained = false;
        else
            throw TrialsParseError("bad trained flag on line " + std::to_string(lineno));
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace tactile::eval
