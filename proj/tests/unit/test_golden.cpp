#include <cstdlib>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "doctest.h"
#include "ldt/model.hpp"
#include "support/golden_case.hpp"

using namespace ldt;

namespace {

struct GoldenFile {
    uint64_t seed = 0;
    std::vector<float> dehazed;
    std::vector<float> transmission;
    double loss_total = 0.0, loss_dehaze = 0.0, loss_trans = 0.0;
    std::vector<float> conv1_kernel_grad;
};

std::vector<float> read_floats(std::ifstream& in, const char* tag) {
    std::string word;
    REQUIRE(static_cast<bool>(in >> word));
    REQUIRE(word == tag);
    size_t count = 0;
    REQUIRE(static_cast<bool>(in >> count));
    std::vector<float> out(count);
    for (size_t i = 0; i < count; ++i) {
        REQUIRE(static_cast<bool>(in >> word));
        out[i] = std::strtof(word.c_str(), nullptr);
    }
    return out;
}

GoldenFile read_golden() {
    std::ifstream in(std::string(LDT_TEST_DATA_DIR) + "/golden_forward.txt");
    REQUIRE_MESSAGE(in.good(),
                    "recorded-values file is missing; build and run the "
                    "ldt_gen_golden target to create it");
    std::string line, word;
    REQUIRE(static_cast<bool>(std::getline(in, line)));
    REQUIRE(line == "ldt-golden v1");
    GoldenFile g;
    REQUIRE(static_cast<bool>(in >> word >> g.seed));
    REQUIRE(word == "seed");
    int64_t b = 0, h = 0, w = 0, c = 0;
    REQUIRE(static_cast<bool>(in >> word >> b >> h >> w >> c));
    REQUIRE(word == "input");
    REQUIRE(b == 1);
    REQUIRE(h == golden::kHeight);
    REQUIRE(w == golden::kWidth);
    REQUIRE(c == 3);
    g.dehazed = read_floats(in, "dehazed");
    g.transmission = read_floats(in, "transmission");
    REQUIRE(static_cast<bool>(in >> word));
    REQUIRE(word == "loss");
    for (double* slot : {&g.loss_total, &g.loss_dehaze, &g.loss_trans}) {
        REQUIRE(static_cast<bool>(in >> word));
        *slot = std::strtod(word.c_str(), nullptr);
    }
    g.conv1_kernel_grad = read_floats(in, "conv1-kernel-grad");
    return g;
}

// Exact equality, reporting the first diverging slot.
void check_same(std::span<const float> got, const std::vector<float>& want,
                const char* what) {
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
        if (got[i] != want[i]) {
            FAIL_CHECK(what << " diverges from the recorded values at slot " << i
                            << ": computed " << got[i] << ", recorded " << want[i]);
            return;
        }
    }
    CHECK(true);  // all slots matched
}

}  // namespace

TEST_CASE("the recorded forward pass reproduces bit for bit") {
    GoldenFile g = read_golden();
    CHECK(g.seed == golden::kSeed);

    golden::Case c = golden::make_case();
    LdtNetParams params = c.params;
    ForwardTrace trace = forward(params, c.input, Mode::Eval);

    check_same(trace.dehazed.values(), g.dehazed, "dehazed output");
    check_same(trace.transmission.values(), g.transmission, "transmission output");
}

TEST_CASE("the recorded loss and first-layer gradients reproduce bit for bit") {
    GoldenFile g = read_golden();
    golden::Case c = golden::make_case();

    LdtNetParams params = c.params;
    ForwardTrace trace = forward(params, c.input, Mode::Train);
    LossValues lv = loss(trace, c.clear, c.trans, c.weights);
    LdtNetGrads grads = backward(trace, c.clear, c.trans, c.weights, c.params);

    CHECK(lv.total == g.loss_total);
    CHECK(lv.dehaze == g.loss_dehaze);
    CHECK(lv.transmission == g.loss_trans);
    check_same(grads.conv1_kernel.values(), g.conv1_kernel_grad,
               "first-layer kernel gradient");
}
