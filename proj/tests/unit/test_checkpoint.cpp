#include "dudf/checkpoint.hpp"

#include "tempdir.hpp"

#include <doctest.h>

#include <filesystem>

using namespace dudf;
using dudf::testing::read_bytes;
using dudf::testing::TempDir;
using dudf::testing::write_text;

namespace {

Checkpoint sample_checkpoint() { return {init_siren(3, 16, 30.0, 42), ScalingParams(250.0), 1234567890123ull}; }

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip restores the float32 network") {
    TempDir dir;
    const Checkpoint ck = sample_checkpoint();
    save_checkpoint(ck, dir / "a.ckpt");
    const Checkpoint back = load_checkpoint(dir / "a.ckpt");
    CHECK(back.seed == ck.seed);
    CHECK(back.alpha.alpha() == 250.0);
    CHECK(back.network.omega0 == 30.0);
    CHECK(back.network.hidden_layers() == 3);
    CHECK(back.network.width() == 16);
    CHECK(flatten_parameters(back.network) == flatten_parameters(quantize_to_float(ck.network)));
    // A second save of the loaded network is byte identical.
    save_checkpoint(back, dir / "b.ckpt");
    CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
  }

  TEST_CASE("layout is a header line plus float32 parameters") {
    TempDir dir;
    const Checkpoint ck = sample_checkpoint();
    save_checkpoint(ck, dir / "a.ckpt");
    const std::string bytes = read_bytes(dir / "a.ckpt");
    const std::string header = "DUDF1 3 16 30 250 1234567890123\n";
    CHECK(bytes.substr(0, header.size()) == header);
    CHECK(bytes.size() == header.size() + 4 * ck.network.parameter_count());
  }

  TEST_CASE("quantization error is bounded by float rounding") {
    const SirenNetwork net = init_siren(2, 8, 30.0, 1);
    const auto a = flatten_parameters(net), b = flatten_parameters(quantize_to_float(net));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 6e-8 * std::abs(a[i]));
  }

  TEST_CASE("corrupt files are rejected") {
    TempDir dir;
    save_checkpoint(sample_checkpoint(), dir / "good.ckpt");
    const std::string good = read_bytes(dir / "good.ckpt");

    write_text(dir / "magic.ckpt", "DUDF2" + good.substr(5));
    CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), CheckpointError);

    write_text(dir / "short.ckpt", good.substr(0, good.size() - 3));
    try {
      load_checkpoint(dir / "short.ckpt");
      FAIL("expected a truncation error");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }

    write_text(dir / "long.ckpt", good + std::string(8, '\0'));
    CHECK_THROWS_AS(load_checkpoint(dir / "long.ckpt"), CheckpointError);

    const auto nl = good.find('\n');
    write_text(dir / "dims.ckpt", "DUDF1 3 17 30 250 1\n" + good.substr(nl + 1));
    CHECK_THROWS_AS(load_checkpoint(dir / "dims.ckpt"), CheckpointError);

    write_text(dir / "header.ckpt", "DUDF1 3 sixteen\n");
    CHECK_THROWS_AS(load_checkpoint(dir / "header.ckpt"), CheckpointError);
    write_text(dir / "empty.ckpt", "");
    CHECK_THROWS_AS(load_checkpoint(dir / "empty.ckpt"), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
  }
}
