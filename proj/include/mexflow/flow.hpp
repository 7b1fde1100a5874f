#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mexflow/field.hpp"
#include "mexflow/image.hpp"

namespace mex::flow {

using mex::FlowField;

struct HornSchunckParams {
    double alpha = 15.0;  // smoothness weight, intensities on a 0..255 scale
    int iterations = 200;
    int warps = 2;
};

struct LucasKanadeParams {
    int window_radius = 7;
    double eigen_floor = 1e-4;  // on window-mean structure tensor, intensities on 0..1
    int iterations = 3;
};

struct Tvl1Params {
    double lambda = 0.15;
    double theta = 0.3;
    double tau = 0.25;
    int warps = 5;
    int inner_iterations = 30;
};

// Progress notification. HS reports every iteration, TV-L1 and LK every warp.
struct FlowEvent {
    std::string method;
    int level = 0;  // 0 = finest
    int warp = 0;
    int iteration = -1;
    const FlowField* flow = nullptr;
};

struct FlowConfig {
    std::string method = "tvl1";
    HornSchunckParams hs;
    LucasKanadeParams lk;
    Tvl1Params tvl1;
    int pyramid_levels = 3;
    double pyramid_scale = 0.5;
    std::function<void(const FlowEvent&)> observer;
};

void validate_config(const FlowConfig& config);

using Estimator = std::function<FlowField(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig&)>;

class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Name -> estimator map. Instances are independent values; there is no
// process-wide registry.
class FlowRegistry {
public:
    // Registry holding horn_schunck, lucas_kanade and tvl1.
    static FlowRegistry with_builtins();

    void register_estimator(const std::string& name, Estimator estimator);
    bool contains(const std::string& name) const { return estimators_.contains(name); }
    std::vector<std::string> names() const;
    FlowField estimate(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) const;

private:
    std::map<std::string, Estimator> estimators_;
};

// Dispatches through the built-in registry.
FlowField estimate_flow(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config);

FlowField horn_schunck(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config);
FlowField tvl1(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config);

struct LucasKanadeResult {
    FlowField flow;
    std::vector<std::uint8_t> ill_conditioned;  // 1 where min eigenvalue < floor (flow zeroed)
    std::vector<double> min_eigenvalue;
};
LucasKanadeResult lucas_kanade(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config);

// Discrete HS energy linearised around zero flow on a single level:
// sum (Ix u + Iy v + It)^2 + alpha^2/4 * sum over 4-neighbour pairs |w_a - w_b|^2,
// intensities scaled to 0..255 and gradients averaged over both frames.
double horn_schunck_energy(const img::GrayImage& onset, const img::GrayImage& apex, const FlowField& flow, double alpha);

// ---- shared image helpers ----

// Central differences with replicated borders.
void central_gradient(const Field& image, Field& gx, Field& gy);
// Bilinear sample with coordinates clamped to the image.
double sample_bilinear(const Field& image, double x, double y);
Field warp_image(const Field& image, const FlowField& flow);
FlowField resize_flow(const FlowField& flow, std::size_t width, std::size_t height);

double mean_endpoint_error(const FlowField& a, const FlowField& b, std::size_t border = 0);

// ---- file formats ----

// MEFL: "MEFL", u8 version 1, u32 width, u32 height, interleaved (p, q) f32, little-endian.
void save_flow(const FlowField& flow, const std::filesystem::path& path);
FlowField load_flow(const std::filesystem::path& path);
// MECH: same layout with a single f32 per pixel.
void save_channel(const Field& channel, const std::filesystem::path& path);
Field load_channel(const std::filesystem::path& path);

}  // namespace mex::flow
