#include <cmath>

#include "doctest.h"
#include "dsseg/errors.hpp"
#include "dsseg/losses.hpp"
#include "dsseg/network.hpp"
#include "dsseg/rng.hpp"
#include "temp_dir.hpp"

using namespace dsseg;

namespace {

NetConfig tiny(int dims = 2) {
    NetConfig c;
    c.base_width = 4;
    c.depth = 2;
    c.dims = dims;
    c.init_seed = 3;
    return c;
}

Volume random_input(Rng& rng, const Shape& spatial, std::size_t channels = 1) {
    Shape s{channels};
    s.insert(s.end(), spatial.begin(), spatial.end());
    NdArray<double> a(s);
    for (auto& v : a) v = rng.normal();
    return Volume(std::move(a));
}

}  // namespace

TEST_CASE("default network has a fixed parameter count independent of the seed") {
    NetConfig c;
    CHECK(build_network(c).parameters().parameter_count() == 121987);
    c.init_seed = 77;
    CHECK(build_network(c).parameters().parameter_count() == 121987);
}

TEST_CASE("initialization is a pure function of the seed") {
    CHECK(build_network(tiny()).parameters() == build_network(tiny()).parameters());
    NetConfig other = tiny();
    other.init_seed = 4;
    CHECK_FALSE(build_network(tiny()).parameters() == build_network(other).parameters());
    CHECK(congruent(build_network(tiny()).parameters(), build_network(other).parameters()));
}

TEST_CASE("forward preserves spatial shape and is deterministic") {
    Rng rng(1);
    const UNet net(tiny());
    const Volume x = random_input(rng, {8, 12});
    const auto y1 = net.forward(x), y2 = net.forward(x);
    CHECK(y1.shape() == Shape{3, 8, 12});
    CHECK(y1 == y2);
    for (auto v : y1) CHECK(std::isfinite(v));
    // Dropout makes stochastic passes seed-dependent.
    CHECK(net.forward(x, true, 5) == net.forward(x, true, 5));
    CHECK_FALSE(net.forward(x, true, 5) == net.forward(x, true, 6));
}

TEST_CASE("forward validates the input") {
    Rng rng(2);
    const UNet net(tiny());
    CHECK_THROWS_AS(net.forward(random_input(rng, {6, 8})), ValidationError);
    CHECK_THROWS_AS(net.forward(random_input(rng, {8, 8}, 2)), ValidationError);
    CHECK_THROWS_AS(net.forward(random_input(rng, {8, 8, 8})), ValidationError);
}

TEST_CASE("3D network runs") {
    Rng rng(3);
    const UNet net(tiny(3));
    CHECK(net.forward(random_input(rng, {4, 4, 8})).shape() == Shape{3, 4, 4, 8});
}

TEST_CASE("backward matches finite differences of ce through softmax") {
    Rng rng(4);
    for (int dims : {2, 3}) {
        UNet net(tiny(dims));
        const Shape sp = dims == 2 ? Shape{4, 8} : Shape{4, 4, 4};
        const Volume x = random_input(rng, sp);
        NdArray<std::int32_t> lab(sp);
        for (auto& v : lab) v = static_cast<std::int32_t>(rng.below(3));
        const LabelMap y(lab, 3);

        auto loss_at = [&](const ParameterTree& p) {
            return ce_loss(softmax(UNet(net.config(), p).forward(x, true, 9)), y);
        };
        auto tape = make_tape();
        const ProbMap p = softmax(net.forward(x, true, 9, *tape));
        ParameterTree grads = net.parameters().zeros_like();
        net.backward(*tape, softmax_backward(p, ce_loss_grad(p, y).grad), grads);

        // A slice of entries from every tensor.
        for (std::size_t e = 0; e < grads.size(); ++e) {
            const std::size_t n = grads[e].array.size();
            for (std::size_t i : {std::size_t{0}, n / 2, n - 1}) {
                ParameterTree plus = net.parameters(), minus = net.parameters();
                const double h = 1e-5;
                plus[e].array[i] += h;
                minus[e].array[i] -= h;
                const double num = (loss_at(plus) - loss_at(minus)) / (2 * h);
                const double ana = grads[e].array[i];
                const double scale = std::max({std::abs(num), std::abs(ana), 1e-6});
                INFO(grads[e].name, "[", i, "] numeric ", num, " analytic ", ana);
                CHECK(std::abs(num - ana) / scale < 1e-3);
            }
        }
    }
}

TEST_CASE("checkpoints round trip bitwise and reject mismatches") {
    test::TempDir tmp;
    const UNet net(tiny());
    const Checkpoint c{17, net.config(), net.parameters()};
    save_checkpoint(c, tmp.path() / "ck");
    const Checkpoint back = load_checkpoint(tmp.path() / "ck");
    CHECK(back.iteration == 17);
    CHECK(back.params == c.params);
    CHECK(to_json(back.net) == to_json(c.net));

    NetConfig wider = tiny();
    wider.base_width = 6;
    CHECK_THROWS_AS(UNet(wider, c.params), CongruenceError);
    CHECK_THROWS_AS(load_checkpoint(tmp.path() / "nothing"), IoError);
}

TEST_CASE("config json and validation") {
    const NetConfig c = net_config_from_json(nlohmann::json{{"dims", "3D"}, {"base_width", 4}});
    CHECK(c.dims == 3);
    CHECK(c.base_width == 4);
    CHECK_THROWS_AS(net_config_from_json(nlohmann::json{{"dims", "4D"}}), ValidationError);
    CHECK_THROWS_AS(net_config_from_json(nlohmann::json{{"dropout_rate", 1.0}}), ValidationError);
    CHECK(tiny().size_multiple() == 4);
}
