#include <doctest.h>

#include <cmath>

#include "mexflow/cnn.hpp"
#include "mexflow/gradcheck.hpp"
#include "support.hpp"

using namespace mex;
using namespace mex::cnn;
using deriv::Channel;
using nn::Tensor;

namespace {

const StreamSpec kPq{{Channel::p, Channel::q}, Fusion::concat};
const StreamSpec kThreeMul{{Channel::p, Channel::q, Channel::rho}, Fusion::multiply};

std::vector<Sample> toy_set(std::size_t per_class, std::size_t streams, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < per_class * 3; ++i) {
        Sample s;
        s.label = i % 3;
        for (std::size_t k = 0; k < streams; ++k) s.inputs.push_back(testing::class_image(s.label, rng));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Tensor> batch_of(const std::vector<Sample>& data) {
    std::vector<const SampleInputs*> ptrs;
    for (const auto& s : data) ptrs.push_back(&s.inputs);
    return stack_batch(ptrs, data.front().inputs.size());
}

const nn::Parameter& param(const OffApexNet& net, const std::string& name) {
    for (const auto* p : net.parameters())
        if (p->name == name) return *p;
    FAIL("no parameter " << name);
    throw 0;
}

nn::LayerParams layer(const OffApexNet& net, const std::string& name) {
    return {param(net, name + ".w"), param(net, name + ".b")};
}

// The original two-stream network written out directly from its layer list.
Tensor two_stream_reference(const OffApexNet& net, const Tensor& p, const Tensor& q) {
    Tensor fused({1, 2 * 784});
    std::size_t offset = 0;
    for (const auto& [name, x] : {std::pair{"stream0", &p}, std::pair{"stream1", &q}}) {
        Tensor in = *x;
        in.reshape({1, 28, 28, 1});
        const Tensor a = nn::maxpool2d(nn::relu(nn::conv2d(in, layer(net, std::string(name) + ".conv1"), 1)));
        const Tensor b = nn::maxpool2d(nn::relu(nn::conv2d(a, layer(net, std::string(name) + ".conv2"), 1)));
        std::copy_n(b.raw(), 784, fused.raw() + offset);
        offset += 784;
    }
    const Tensor h1 = nn::relu(nn::dense(fused, layer(net, "fc1")));
    const Tensor h2 = nn::relu(nn::dense(h1, layer(net, "fc2")));
    return nn::dense(h2, layer(net, "out"));
}

}  // namespace

TEST_CASE("shape chain per stream") {
    const OffApexNet net(kPq, 1);
    const auto chain = net.shape_chain();
    const std::vector<std::pair<std::string, nn::Shape>> expect{
        {"conv1", {1, 28, 28, 6}}, {"pool1", {1, 14, 14, 6}}, {"conv2", {1, 14, 14, 16}}, {"pool2", {1, 7, 7, 16}},
        {"fused", {1, 1568}},      {"fc1", {1, 1024}},       {"fc2", {1, 1024}},         {"output", {1, 3}}};
    CHECK(chain == expect);
}

TEST_CASE("fusion dimension law") {
    CHECK(OffApexNet(kPq, 1).shape_chain()[4].second == nn::Shape{1, 1568});
    CHECK(OffApexNet(kThreeMul, 1).shape_chain()[4].second == nn::Shape{1, 784});
    CHECK(OffApexNet({{Channel::p, Channel::q, Channel::rho}, Fusion::concat}, 1).shape_chain()[4].second == nn::Shape{1, 2352});
    CHECK(OffApexNet({{Channel::p}, Fusion::concat}, 1).shape_chain()[4].second == nn::Shape{1, 784});
    for (std::size_t s = 1; s <= 3; ++s) {
        const auto every = deriv::all_channels();
        std::vector<Channel> ch(every.begin(), every.begin() + static_cast<long>(s));
        CHECK(StreamSpec{ch, Fusion::concat}.head_input() == 784 * s);
        if (s >= 2) CHECK(StreamSpec{ch, Fusion::multiply}.head_input() == 784);
        CHECK(param(OffApexNet({ch, Fusion::concat}, 2), "fc1.w").value.shape() == nn::Shape{1024, 784 * s});
    }
    CHECK_THROWS_AS(OffApexNet({{Channel::p}, Fusion::multiply}, 1), std::invalid_argument);
    CHECK_THROWS_AS(OffApexNet({{Channel::p, Channel::p}, Fusion::concat}, 1), std::invalid_argument);
    CHECK_THROWS_AS(OffApexNet({{}, Fusion::concat}, 1), std::invalid_argument);
}

TEST_CASE("forward special cases") {
    SUBCASE("zero inputs give the output biases") {
        OffApexNet net(kPq, 3);
        for (auto* p : net.parameters())
            if (p->name.ends_with(".b")) {
                Rng rng(4);
                for (auto& v : p->value.data()) v = rng.uniform(-0.5, 0.5);
            }
        // Conv biases leak through zero inputs, so clear them for this check.
        for (auto* p : net.parameters())
            if (p->name.starts_with("stream") && p->name.ends_with(".b")) p->value.fill(0.0);
        const auto out = net.forward({Tensor({1, 28, 28, 1}), Tensor({1, 28, 28, 1})});
        const auto& bias = param(net, "out.b").value;
        // FC biases still feed FC2 and the output, so compare with a head evaluated on zeros.
        Tensor h1 = nn::relu(nn::dense(Tensor({1, 1568}), layer(net, "fc1")));
        Tensor h2 = nn::relu(nn::dense(h1, layer(net, "fc2")));
        const Tensor ref = nn::dense(h2, layer(net, "out"));
        for (std::size_t k = 0; k < 3; ++k) CHECK(out.logits[k] == ref[k]);
        // With every bias zero the logits are exactly the (zero) output biases.
        OffApexNet fresh(kPq, 5);
        const auto z = fresh.forward({Tensor({1, 28, 28, 1}), Tensor({1, 28, 28, 1})});
        for (std::size_t k = 0; k < 3; ++k) CHECK(z.logits[k] == param(fresh, "out.b").value[k]);
        CHECK(bias.size() == 3);
    }
    SUBCASE("an all-zero stream annihilates the product") {
        OffApexNet net(kThreeMul, 6);
        Rng rng(7);
        const Tensor a = testing::random_tensor({2, 28, 28, 1}, rng), b = testing::random_tensor({2, 28, 28, 1}, rng);
        const Tensor c = testing::random_tensor({2, 28, 28, 1}, rng);
        const auto z1 = net.forward({a, Tensor({2, 28, 28, 1}), b});
        const auto z2 = net.forward({c, Tensor({2, 28, 28, 1}), a});
        CHECK(z1.logits == z2.logits);
        CHECK(z1.penultimate == z2.penultimate);
    }
    SUBCASE("concat(p, q) equals the transplanted two-stream reference") {
        const OffApexNet net(kPq, 8);
        Rng rng(9);
        for (int t = 0; t < 3; ++t) {
            const Tensor p = testing::random_tensor({28, 28, 1}, rng), q = testing::random_tensor({28, 28, 1}, rng);
            Tensor pb = p, qb = q;
            pb.reshape({1, 28, 28, 1});
            qb.reshape({1, 28, 28, 1});
            const auto out = net.forward({pb, qb});
            const Tensor ref = two_stream_reference(net, p, q);
            for (std::size_t k = 0; k < 3; ++k) CHECK(out.logits[k] == doctest::Approx(ref[k]).epsilon(1e-12));
        }
    }
    SUBCASE("wrong stream count") {
        const OffApexNet net(kPq, 1);
        CHECK_THROWS_AS(net.forward({Tensor({1, 28, 28, 1})}), std::invalid_argument);
    }
}

TEST_CASE("full-network gradient check") {
    for (const auto& spec : {kPq, kThreeMul}) {
        CAPTURE(fusion_name(spec.fusion));
        OffApexNet net(spec, 10);
        Rng rng(11);
        auto data = toy_set(1, spec.streams(), 12);
        // Nonzero biases keep activations away from the rectifier kink.
        for (auto* p : net.parameters())
            if (p->name.ends_with(".b"))
                for (auto& v : p->value.data()) v = rng.uniform(0.05, 0.2);
        const auto batch = batch_of(data);
        std::vector<std::size_t> labels;
        for (const auto& s : data) labels.push_back(s.label);
        auto params = net.parameters();
        auto loss = [&] {
            double total = 0;
            const auto out = net.forward(batch);
            for (std::size_t i = 0; i < labels.size(); ++i)
                total += nn::softmax_xent(std::span<const double>(out.logits.raw() + 3 * i, 3), labels[i]).loss;
            return total / static_cast<double>(labels.size());
        };
        auto grads = [&] {
            net.zero_grad();
            net.forward_backward(batch, labels);
        };
        // Gradients under 1e-6 sit at the finite-difference round-off level and are
        // held to an absolute 1e-10 instead.
        CHECK(nn::grad_check(params, loss, grads, 1e-5, 200, 13, 1e-6) < 1e-4);
    }
}

TEST_CASE("checkpoint round trip") {
    testing::TempDir dir("cnn");
    OffApexNet net(kThreeMul, 14);
    auto data = toy_set(2, 3, 15);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    train(net, data, cfg);
    net.save(dir.path());
    const OffApexNet back = OffApexNet::load(dir.path());
    const auto batch = batch_of(data);
    CHECK(back.forward(batch).logits == net.forward(batch).logits);
    CHECK(back.forward(batch).penultimate == net.forward(batch).penultimate);
    CHECK(predict_batch(back, data) == predict_batch(net, data));
    CHECK(back.spec().fusion == Fusion::multiply);
    CHECK(std::filesystem::exists(dir / "index.json"));
    std::filesystem::remove(dir / "fc2.w.mxtn");
    CHECK_THROWS(OffApexNet::load(dir.path()));
}

TEST_CASE("training behaviour") {
    const auto data = toy_set(10, 2, 16);
    SUBCASE("zero learning rate changes nothing") {
        OffApexNet net(kPq, 17);
        const OffApexNet before = net;
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.learning_rate = 0.0;
        cfg.batch_size = 8;
        const auto trace = train(net, data, cfg);
        for (std::size_t i = 0; i < net.parameters().size(); ++i)
            CHECK(net.parameters()[i]->value == before.parameters()[i]->value);
        const auto ref = train(net, data, cfg);
        for (std::size_t e = 0; e < 3; ++e) CHECK(trace[e].loss == doctest::Approx(trace[0].loss).epsilon(1e-12));
        CHECK(ref[0].loss == trace[0].loss);
    }
    SUBCASE("same seed, same trace") {
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 8;
        OffApexNet a(kPq, 18), b(kPq, 18);
        const auto ta = train(a, data, cfg), tb = train(b, data, cfg);
        for (std::size_t e = 0; e < 3; ++e) {
            CHECK(ta[e].loss == tb[e].loss);
            CHECK(ta[e].train_accuracy == tb[e].train_accuracy);
        }
        CHECK(a.forward(batch_of(data)).logits == b.forward(batch_of(data)).logits);
    }
    SUBCASE("checkpoint callback epochs") {
        TrainConfig cfg;
        cfg.epochs = 4;
        cfg.batch_size = 16;
        cfg.checkpoints = {0, 2, 4};
        std::vector<std::size_t> seen;
        OffApexNet net(kPq, 19);
        train(net, data, cfg, [&](std::size_t e, const OffApexNet&) { seen.push_back(e); });
        CHECK(seen == std::vector<std::size_t>{0, 2, 4});
    }
    SUBCASE("non-finite input aborts with the epoch") {
        auto bad = data;
        bad[3].inputs[0][5] = NAN;
        OffApexNet net(kPq, 20);
        TrainConfig cfg;
        cfg.epochs = 2;
        CHECK_THROWS_WITH_AS(train(net, bad, cfg), doctest::Contains("epoch 1"), TrainingError);
    }
}

TEST_CASE("30-sample overfit") {
    const auto data = toy_set(10, 2, 21);
    OffApexNet net(kPq, 22);
    TrainConfig cfg;
    cfg.epochs = 150;  // the bound is 500; this set gets there far sooner
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-4;
    std::size_t reached = 0;
    std::vector<EpochStats> trace;
    for (std::size_t e = 10; e <= cfg.epochs; e += 10) cfg.checkpoints.push_back(e);
    trace = train(net, data, cfg, [&](std::size_t e, const OffApexNet& n) {
        if (!reached) {
            const auto pred = predict_batch(n, data);
            std::size_t ok = 0;
            for (std::size_t i = 0; i < data.size(); ++i) ok += pred[i] == data[i].label;
            if (ok == data.size()) reached = e;
        }
    });
    CHECK(reached > 0);
    MESSAGE("all 30 training samples correct by epoch " << reached);
    // 50-epoch moving average of the loss never rises.
    std::vector<double> ma;
    for (std::size_t e = 50; e <= trace.size(); ++e) {
        double s = 0;
        for (std::size_t k = e - 50; k < e; ++k) s += trace[k].loss;
        ma.push_back(s / 50);
    }
    for (std::size_t i = 1; i < ma.size(); ++i) CHECK(ma[i] <= ma[i - 1] + 1e-12);
}

TEST_CASE("prediction and features") {
    const OffApexNet net(kPq, 23);
    const auto data = toy_set(1, 2, 24);
    const auto feats = extract_features(net, std::span<const Sample>(data.data(), 1));
    CHECK(feats.shape() == nn::Shape{1, 1024});
    const auto all = extract_features(net, data);
    CHECK(all.shape() == nn::Shape{3, 1024});
    const auto single = extract_features(net, std::span<const Sample>(data.data() + 2, 1));
    for (std::size_t j = 0; j < 1024; ++j) CHECK(all[2 * 1024 + j] == doctest::Approx(single[j]).epsilon(1e-12));
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(predict(net, data[i].inputs) == predict_batch(net, data)[i]);

    SUBCASE("symmetric output layer ties to class 0") {
        OffApexNet sym(kPq, 25);
        for (auto* p : sym.parameters())
            if (p->name.starts_with("out")) p->value.fill(0.01);
        CHECK(predict(sym, data[1].inputs) == 0);
        CHECK(predict(sym, data[2].inputs) == 0);
    }
}
