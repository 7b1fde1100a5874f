#include "mexflow/apex.hpp"

#include <algorithm>
#include <cmath>

namespace mex::apex {

MotionSignal motion_signal(std::span<const img::GrayImage> frames, std::size_t onset_index,
                           const flow::FlowConfig& config, SignalOptions options) {
    static const flow::FlowRegistry builtins = flow::FlowRegistry::with_builtins();
    return motion_signal(frames, onset_index, builtins, config, options);
}

MotionSignal motion_signal(std::span<const img::GrayImage> frames, std::size_t onset_index,
                           const flow::FlowRegistry& registry, const flow::FlowConfig& config,
                           SignalOptions options) {
    if (frames.size() < 2) throw SpottingError("motion_signal: need at least 2 frames");
    if (onset_index >= frames.size()) throw SpottingError("motion_signal: onset index out of range");
    std::vector<double> raw(frames.size(), 0.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i == onset_index) continue;
        flow::FlowField f;
        try {
            f = registry.estimate(frames[onset_index], frames[i], config);
        } catch (const std::exception& e) {
            throw SpottingError("motion_signal: flow failed at frame " + std::to_string(i) + ": " + e.what());
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) sum += std::hypot(f.p[k], f.q[k]);
        raw[i] = sum / static_cast<double>(f.size());
    }
    MotionSignal s{raw};
    if (options.smooth && raw.size() >= 3) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const std::size_t lo = i ? i - 1 : 0, hi = std::min(i + 1, raw.size() - 1);
            double sum = 0.0;
            for (std::size_t k = lo; k <= hi; ++k) sum += raw[k];
            s.values[i] = sum / static_cast<double>(hi - lo + 1);
        }
        s.values[onset_index] = 0.0;
    }
    return s;
}

std::vector<Peak> detect_local_peaks(const MotionSignal& signal) {
    const auto& v = signal.values;
    std::vector<Peak> peaks;
    if (v.size() < 3) return peaks;
    std::size_t i = 1;
    while (i + 1 < v.size()) {
        if (v[i] > v[i - 1]) {
            std::size_t j = i;
            while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
            if (j + 1 < v.size() && v[j + 1] < v[i]) peaks.push_back({i, v[i]});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return peaks;
}

std::size_t split_point(Range r) { return r.lo + (r.length() + 1) / 2 - 1; }

ApexResult spot_apex_dc(const MotionSignal& signal) {
    if (signal.values.empty()) throw SpottingError("spot_apex_dc: empty signal");
    ApexResult result;
    result.signal = signal;
    const auto peaks = detect_local_peaks(signal);
    const auto& v = signal.values;

    auto half_score = [&](Range r) {
        double sum = 0.0;
        bool any = false;
        for (const auto& p : peaks)
            if (p.index >= r.lo && p.index <= r.hi) {
                sum += p.magnitude;
                any = true;
            }
        if (any) return sum;
        return *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(r.lo), v.begin() + static_cast<std::ptrdiff_t>(r.hi) + 1);
    };

    Range current{0, v.size() - 1};
    result.visited_ranges.push_back(current);
    while (current.length() > 1) {
        const std::size_t mid = split_point(current);
        const Range left{current.lo, mid}, right{mid + 1, current.hi};
        current = half_score(right) > half_score(left) ? right : left;
        result.visited_ranges.push_back(current);
    }
    result.apex_index = current.lo;
    return result;
}

std::size_t spot_apex_bruteforce(const MotionSignal& signal) {
    if (signal.values.empty()) throw SpottingError("spot_apex_bruteforce: empty signal");
    return static_cast<std::size_t>(std::max_element(signal.values.begin(), signal.values.end()) - signal.values.begin());
}

}  // namespace mex::apex
