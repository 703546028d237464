#include <cstring>
#include <filesystem>

#include "aebound/checkpoint.hpp"
#include "aebound/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aebound;
using namespace testing_support;

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const NetworkParams p = random_net(rng, {9, 6, 3, 6, 9}, Activation::sigmoid, 1.0 / 3.0, trial % 2 == 1);
        const NetworkParams q = checkpoint_from_string(checkpoint_to_string(p));
        REQUIRE(q.depth() == p.depth());
        CHECK(q.bottleneck_index() == p.bottleneck_index());
        for (std::size_t i = 0; i < p.depth(); ++i) {
            const auto a = p.layers()[i].weights.values();
            const auto b = q.layers()[i].weights.values();
            CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
            CHECK(p.layers()[i].bias == q.layers()[i].bias);
            CHECK(p.layers()[i].activation == q.layers()[i].activation);
        }
        CHECK(checkpoint_to_string(q) == checkpoint_to_string(p));
    }
}

TEST_CASE("fixture checkpoint loads") {
    const NetworkParams p = load_checkpoint(std::filesystem::path(AEBOUND_SOURCE_DIR) / "tests/fixtures/small_net.json");
    CHECK(p.depth() == 2);
    CHECK(p.input_dim() == 4);
    CHECK(p.code_dim() == 2);
    CHECK(p.layers()[0].weights(1, 3) == 0.6);
    CHECK(p.layers()[1].activation == Activation::sigmoid);
    CHECK_FALSE(p.has_bias());
}

TEST_CASE("malformed checkpoints are data errors") {
    auto code_of = [](const std::string& text) {
        try {
            checkpoint_from_string(text);
        } catch (const DataError& e) {
            return e.code();
        }
        FAIL("accepted: " << text);
        return DataErrorCode::io;
    };
    CHECK(code_of("{") == DataErrorCode::malformed);
    CHECK(code_of(R"({"dims":[2,1,2]})") == DataErrorCode::malformed);
    CHECK(code_of(R"({"dims":[2,1,2],"bottleneck_index":0,"activations":["relu"],"weights":[[1,1],[1,1]]})") ==
          DataErrorCode::malformed);
    CHECK(code_of(R"({"dims":[2,1,2],"bottleneck_index":0,"activations":["relu","tanh"],"weights":[[1,1],[1,1]]})") ==
          DataErrorCode::malformed);
    CHECK(code_of(R"({"dims":[2,1,2],"bottleneck_index":0,"activations":["relu","relu"],"weights":[[1],[1,1]]})") ==
          DataErrorCode::malformed);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), DataError);
}
