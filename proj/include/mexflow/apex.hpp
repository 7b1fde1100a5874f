#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mexflow/flow.hpp"
#include "mexflow/image.hpp"

namespace mex::apex {

// Per-frame mean flow magnitude relative to the onset frame.
struct MotionSignal {
    std::vector<double> values;
    std::size_t size() const { return values.size(); }
};

struct Peak {
    std::size_t index;
    double magnitude;
    friend bool operator==(const Peak&, const Peak&) = default;
};

struct Range {
    std::size_t lo, hi;  // inclusive
    std::size_t length() const { return hi - lo + 1; }
    friend bool operator==(const Range&, const Range&) = default;
};

struct ApexResult {
    std::size_t apex_index = 0;
    MotionSignal signal;
    std::vector<Range> visited_ranges;  // full range first, then each retained half
    friend bool operator==(const ApexResult& a, const ApexResult& b) {
        return a.apex_index == b.apex_index && a.signal.values == b.signal.values && a.visited_ranges == b.visited_ranges;
    }
};

struct SignalOptions {
    bool smooth = true;  // centred moving average over 3 frames
};

class SpottingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

MotionSignal motion_signal(std::span<const img::GrayImage> frames, std::size_t onset_index,
                           const flow::FlowConfig& config, SignalOptions options = {});
MotionSignal motion_signal(std::span<const img::GrayImage> frames, std::size_t onset_index,
                           const flow::FlowRegistry& registry, const flow::FlowConfig& config,
                           SignalOptions options = {});

// Strict interior local maxima; a plateau counts once, at its leftmost index.
std::vector<Peak> detect_local_peaks(const MotionSignal& signal);

// First split point of [lo, hi]: the left half is [lo, mid].
std::size_t split_point(Range r);

ApexResult spot_apex_dc(const MotionSignal& signal);

// Leftmost global argmax.
std::size_t spot_apex_bruteforce(const MotionSignal& signal);

}  // namespace mex::apex
