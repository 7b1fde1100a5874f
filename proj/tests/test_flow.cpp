#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mexflow/binary_io.hpp"
#include "mexflow/flow.hpp"
#include "support.hpp"

using namespace mex;
using namespace mex::flow;

namespace {

FlowConfig config_for(const std::string& method) {
    FlowConfig c;
    c.method = method;
    return c;
}

// Median recovered vector over pixels at least `border` from the edge.
std::pair<double, double> median_vector(const FlowField& f, std::size_t border, const std::vector<std::uint8_t>* skip = nullptr) {
    std::vector<double> ps, qs;
    for (std::size_t y = border; y + border < f.height; ++y)
        for (std::size_t x = border; x + border < f.width; ++x) {
            const std::size_t i = y * f.width + x;
            if (skip && (*skip)[i]) continue;
            ps.push_back(f.p[i]);
            qs.push_back(f.q[i]);
        }
    return {testing::median(ps), testing::median(qs)};
}

double sup_norm(const FlowField& f) {
    double m = 0;
    for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::hypot(f.p[i], f.q[i]));
    return m;
}

FlowField constant_flow(std::size_t w, std::size_t h, double u, double v) {
    FlowField f(w, h);
    std::fill(f.p.begin(), f.p.end(), u);
    std::fill(f.q.begin(), f.q.end(), v);
    return f;
}

}  // namespace

TEST_CASE("identical frames give zero flow for every method") {
    const testing::BlobTexture tex(64, 1);
    const auto im = tex.render(64, 64, 0, 0);
    for (const auto& m : FlowRegistry::with_builtins().names()) {
        CAPTURE(m);
        CHECK(sup_norm(estimate_flow(im, im, config_for(m))) < 1e-3);
    }
}

TEST_CASE("translated texture is recovered by every method") {
    const testing::BlobTexture tex(64, 2);
    const auto a = tex.render(64, 64, 0, 0), b = tex.render(64, 64, 1.0, 0.5);
    for (const std::string m : {"horn_schunck", "tvl1"}) {
        CAPTURE(m);
        const auto [u, v] = median_vector(estimate_flow(a, b, config_for(m)), 6);
        CHECK(std::hypot(u - 1.0, v - 0.5) < 0.2);
    }
    const auto lk = lucas_kanade(a, b, config_for("lucas_kanade"));
    const auto [u, v] = median_vector(lk.flow, 6, &lk.ill_conditioned);
    CHECK(std::hypot(u - 1.0, v - 0.5) < 0.2);
}

TEST_CASE("Lucas-Kanade conditioning") {
    SUBCASE("constant images flag every pixel") {
        const img::GrayImage c(32, 32, 0.4);
        const auto r = lucas_kanade(c, c, config_for("lucas_kanade"));
        for (auto f : r.ill_conditioned) CHECK(f == 1);
        CHECK(sup_norm(r.flow) == 0.0);
    }
    SUBCASE("unflagged pixels meet the eigenvalue floor") {
        const testing::BlobTexture tex(48, 3, 8);
        auto cfg = config_for("lucas_kanade");
        cfg.lk.eigen_floor = 2e-4;
        const auto r = lucas_kanade(tex.render(48, 48, 0, 0), tex.render(48, 48, 0.6, -0.4), cfg);
        std::size_t flagged = 0;
        for (std::size_t i = 0; i < r.flow.size(); ++i) {
            if (r.ill_conditioned[i]) {
                ++flagged;
                CHECK(r.flow.p[i] == 0.0);
                CHECK(r.min_eigenvalue[i] < cfg.lk.eigen_floor);
            } else {
                CHECK(r.min_eigenvalue[i] >= cfg.lk.eigen_floor);
            }
        }
        CHECK(flagged < r.flow.size());
    }
}

TEST_CASE("Horn-Schunck energy never increases across iterations") {
    const testing::BlobTexture tex(48, 4);
    const auto a = tex.render(48, 48, 0, 0), b = tex.render(48, 48, 0.7, 0.3);
    auto cfg = config_for("horn_schunck");
    cfg.pyramid_levels = 1;
    cfg.hs.warps = 1;
    cfg.hs.iterations = 80;
    std::vector<double> energies{horn_schunck_energy(a, b, FlowField(48, 48), cfg.hs.alpha)};
    cfg.observer = [&](const FlowEvent& e) { energies.push_back(horn_schunck_energy(a, b, *e.flow, cfg.hs.alpha)); };
    horn_schunck(a, b, cfg);
    REQUIRE(energies.size() == 81);
    for (std::size_t i = 1; i < energies.size(); ++i) CHECK(energies[i] <= energies[i - 1] * (1 + 1e-12));
    CHECK(energies.back() < 0.5 * energies.front());
}

TEST_CASE("TV-L1 endpoint error does not grow across warps") {
    auto cfg = config_for("tvl1");
    cfg.pyramid_levels = 1;
    std::vector<double> total(static_cast<std::size_t>(cfg.tvl1.warps), 0.0);
    Rng rng(5);
    for (int pair = 0; pair < 5; ++pair) {
        const testing::BlobTexture tex(48, 100 + static_cast<std::uint64_t>(pair));
        const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
        const auto truth = constant_flow(48, 48, u, v);
        cfg.observer = [&](const FlowEvent& e) {
            if (e.level == 0) total[static_cast<std::size_t>(e.warp)] += mean_endpoint_error(*e.flow, truth, 6);
        };
        tvl1(tex.render(48, 48, 0, 0), tex.render(48, 48, u, v), cfg);
    }
    for (std::size_t w = 1; w < total.size(); ++w) CHECK(total[w] <= total[w - 1] + 1e-9);
}

// Offsets are multiples of 4 so the three pyramid levels see the same sampling grid.
TEST_CASE("integer shifts of both frames leave the interior flow unchanged") {
    const testing::BlobTexture tex(80, 6);
    for (const std::string m : {"horn_schunck", "tvl1"}) {
        CAPTURE(m);
        const auto f0 = estimate_flow(tex.render(64, 64, 0, 0), tex.render(64, 64, 0.8, -0.4), config_for(m));
        const auto f1 = estimate_flow(tex.render(64, 64, 0, 0, 4, 8), tex.render(64, 64, 0.8, -0.4, 4, 8), config_for(m));
        double worst = 0.0;
        for (std::size_t y = 12; y < 44; ++y)
            for (std::size_t x = 12; x < 48; ++x) {
                const std::size_t i = (y + 8) * 64 + (x + 4), j = y * 64 + x;
                worst = std::max(worst, std::hypot(f0.p[i] - f1.p[j], f0.q[i] - f1.q[j]));
            }
        CHECK(worst < 0.05);
    }
}

TEST_CASE("estimator registry") {
    auto reg = FlowRegistry::with_builtins();
    CHECK(reg.names() == std::vector<std::string>{"horn_schunck", "lucas_kanade", "tvl1"});
    CHECK_THROWS_AS(reg.register_estimator("tvl1", [](const img::GrayImage& a, const img::GrayImage&, const FlowConfig&) {
        return FlowField(a.width(), a.height());
    }),
                    std::invalid_argument);
    reg.register_estimator("farneback", [](const img::GrayImage& a, const img::GrayImage&, const FlowConfig&) {
        return FlowField(a.width(), a.height());
    });
    const testing::BlobTexture tex(32, 7);
    const auto a = tex.render(32, 32, 0, 0), b = tex.render(32, 32, 1, 0);
    const auto f = reg.estimate(a, b, config_for("farneback"));
    CHECK(sup_norm(f) == 0.0);
    CHECK(reg.names().size() == 4);
    // A fresh built-in registry is not affected.
    CHECK_FALSE(FlowRegistry::with_builtins().contains("farneback"));
    CHECK_THROWS_AS(estimate_flow(a, b, config_for("farneback")), FlowError);
}

TEST_CASE("input validation") {
    const img::GrayImage a(32, 32, 0.5), b(32, 30, 0.5);
    CHECK_THROWS_AS(estimate_flow(a, b, config_for("tvl1")), FlowError);
    auto cfg = config_for("tvl1");
    cfg.pyramid_levels = 4;  // 32 -> 16 -> 8 -> 4
    CHECK_THROWS_AS(estimate_flow(a, a, cfg), FlowError);
    cfg = config_for("horn_schunck");
    cfg.hs.alpha = -1;
    CHECK_THROWS_AS(estimate_flow(a, a, cfg), std::invalid_argument);
}

TEST_CASE("deterministic output") {
    const testing::BlobTexture tex(48, 8);
    const auto a = tex.render(48, 48, 0, 0), b = tex.render(48, 48, 0.5, 0.5);
    for (const auto& m : FlowRegistry::with_builtins().names())
        CHECK(estimate_flow(a, b, config_for(m)) == estimate_flow(a, b, config_for(m)));
}

TEST_CASE("flow and channel files") {
    testing::TempDir dir("flowio");
    FlowField f(5, 3);
    Rng rng(9);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.p[i] = rng.uniform(-3, 3);
        f.q[i] = rng.uniform(-3, 3);
    }
    save_flow(f, dir / "a.mefl");
    const auto g = load_flow(dir / "a.mefl");
    CHECK(g.width == 5);
    CHECK(g.height == 3);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(g.p[i] == static_cast<double>(static_cast<float>(f.p[i])));
        CHECK(g.q[i] == static_cast<double>(static_cast<float>(f.q[i])));
    }
    CHECK(std::filesystem::file_size(dir / "a.mefl") == 4 + 1 + 8 + 15 * 8);

    Field c(4, 4);
    for (auto& v : c.values) v = rng.uniform(-1, 1);
    save_channel(c, dir / "c.mech");
    const Field d = load_channel(dir / "c.mech");
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(d.values[i] == static_cast<double>(static_cast<float>(c.values[i])));
    // A flow file is not a channel file.
    CHECK_THROWS_AS(load_channel(dir / "a.mefl"), io::FormatError);
    std::filesystem::resize_file(dir / "a.mefl", 30);
    CHECK_THROWS_WITH_AS(load_flow(dir / "a.mefl"), doctest::Contains("byte offset"), io::FormatError);
}

TEST_CASE("mean endpoint error") {
    const auto a = constant_flow(10, 10, 1, 0), b = constant_flow(10, 10, 0, 0);
    CHECK(mean_endpoint_error(a, b) == doctest::Approx(1.0));
    CHECK(mean_endpoint_error(a, a, 2) == 0.0);
}
