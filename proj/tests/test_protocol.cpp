#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "fedecg/bundle.hpp"
#include "fedecg/error.hpp"
#include "fedecg/model.hpp"
#include "fedecg/protocol.hpp"
#include "support/bundles.hpp"

using namespace fedecg;
using namespace fedecg::wire;

namespace {

ErrorCode decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_message(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode unexpectedly succeeded");
  return ErrorCode::kInvalidArgument;
}

std::vector<Message> sample_messages() {
  Rng rng(17);
  return {make_register(ModelKind::kClassifier, 5, 42),
          make_model(ModelKind::kAutoencoder, 1, testing::random_bundle(rng, 3, ModelKind::kAutoencoder)),
          make_update(ModelKind::kClassifier, 2, 4000, testing::random_bundle(rng, 2)),
          make_ack(ModelKind::kClassifier, 9), make_shutdown(3)};
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("bundle round trip is bit-exact") {
    Rng rng(1);
    const WeightBundle b = testing::random_bundle(rng, 4);
    CHECK(bit_equal(deserialize_bundle(serialize_bundle(b)), b));
    const WeightBundle empty(ModelKind::kAutoencoder);
    const WeightBundle back = deserialize_bundle(serialize_bundle(empty));
    CHECK(back.empty());
    CHECK(back.kind() == ModelKind::kAutoencoder);
  }

  TEST_CASE("special float values survive serialisation") {
    WeightBundle b(ModelKind::kClassifier);
    b.add("x.bias", Tensor({4}, std::vector<float>{-0.0f, 1e-40f, 3.4e38f, -1.5f}));
    const WeightBundle back = deserialize_bundle(serialize_bundle(b));
    CHECK(std::memcmp(back.at("x.bias").data(), b.at("x.bias").data(), 4 * sizeof(float)) == 0);
  }

  TEST_CASE("bundle file round trip and hash") {
    const auto path = std::filesystem::temp_directory_path() / "fedecg_test_bundle.fwb";
    const WeightBundle b = build_autoencoder(2).weights();
    save_bundle(b, path);
    const WeightBundle back = load_bundle(path);
    CHECK(bit_equal(back, b));
    CHECK(bundle_hash(back) == bundle_hash(b));
    CHECK(hash_hex(bundle_hash(b)).size() == 16);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_bundle(path), Error);
  }

  TEST_CASE("every message type round-trips") {
    for (const Message& m : sample_messages()) {
      INFO(to_string(m.type));
      CHECK(decode_message(encode_message(m)) == m);
    }
  }

  TEST_CASE("REGISTER byte layout") {
    const auto bytes = encode_message(make_register(ModelKind::kAutoencoder, 3, 7));
    const std::vector<std::uint8_t> expected = {'F', 'E', 'C', 'G', 0x01, 0x00, 0x00, 0x03, 0x00,
                                                0x00, 0x00, 0x07, 0x00, 0x00, 0x00};
    CHECK(bytes == expected);
    const auto framed = frame(bytes);
    CHECK(framed.size() == bytes.size() + 4);
    CHECK(framed[0] == bytes.size());
  }

  TEST_CASE("large UPDATE round-trips") {
    Rng rng(2);
    WeightBundle b(ModelKind::kClassifier);
    b.add("dense1.kernel", testing::random_float_tensor({512, 600}, rng));
    const Message m = make_update(ModelKind::kClassifier, 1, 123456789, b);
    const auto bytes = encode_message(m);
    CHECK(bytes.size() >= (1u << 20));
    CHECK(decode_message(bytes) == m);
  }

  TEST_CASE("negative cases map to distinct error codes") {
    const auto good = encode_message(make_ack(ModelKind::kAutoencoder, 1));
    auto bad = good;
    bad[0] = 'X';
    CHECK(decode_error(bad) == ErrorCode::kBadMagic);
    bad = good;
    bad[4] = 2;
    CHECK(decode_error(bad) == ErrorCode::kUnsupportedVersion);
    bad = good;
    bad[5] = 9;
    CHECK(decode_error(bad) == ErrorCode::kUnknownMessageType);
    bad = good;
    bad[6] = 7;
    CHECK(decode_error(bad) == ErrorCode::kMalformed);
    bad = good;
    bad.push_back(0);
    CHECK(decode_error(bad) == ErrorCode::kMalformed);
  }

  TEST_CASE("every strict prefix is rejected as truncated") {
    for (const Message& m : sample_messages()) {
      const auto bytes = encode_message(m);
      for (std::size_t n = 0; n < bytes.size(); ++n) {
        CHECK(decode_error(std::span(bytes).first(n)) == ErrorCode::kTruncated);
      }
    }
  }

  TEST_CASE("corrupting a length field is rejected as truncated") {
    Rng rng(3);
    const auto bytes = encode_message(make_model(ModelKind::kClassifier, 1, testing::random_bundle(rng, 1)));
    auto bad = bytes;
    // header(11) + entry count(2) puts the first name length at offset 13.
    bad[13] = 0xff;
    bad[14] = 0x7f;
    CHECK(decode_error(bad) == ErrorCode::kTruncated);
    bad = bytes;
    bad[11] = 0xff;  // entry count
    CHECK(decode_error(bad) == ErrorCode::kTruncated);
  }

  TEST_CASE("bad ranks and zero dimensions are malformed") {
    WeightBundle b(ModelKind::kClassifier);
    b.add("a.bias", Tensor({2}, 1.0f));
    const auto bytes = encode_message(make_model(ModelKind::kClassifier, 1, b));
    const std::size_t rank_at = 11 + 2 + 2 + 6;
    REQUIRE(bytes[rank_at] == 1);
    auto bad = bytes;
    bad[rank_at] = 4;
    CHECK(decode_error(bad) == ErrorCode::kMalformed);
    bad = bytes;
    bad[rank_at + 1] = 0;
    CHECK(decode_error(bad) == ErrorCode::kMalformed);
  }

  TEST_CASE("random byte flips never crash the decoder") {
    Rng rng(4);
    const auto msgs = sample_messages();
    for (int trial = 0; trial < 2000; ++trial) {
      auto bytes = encode_message(msgs[rng.below(msgs.size())]);
      const int flips = 1 + static_cast<int>(rng.below(4));
      for (int f = 0; f < flips; ++f) bytes[rng.below(bytes.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      try {
        const Message m = decode_message(bytes);
        CHECK(encode_message(m).size() == bytes.size());
      } catch (const Error&) {
      }
    }
  }

  TEST_CASE("take_frame splits a byte stream") {
    const auto a = encode_message(make_ack(ModelKind::kAutoencoder, 1));
    const auto b = encode_message(make_shutdown(2));
    std::vector<std::uint8_t> stream = frame(a);
    const auto fb = frame(b);
    stream.insert(stream.end(), fb.begin(), fb.begin() + 6);
    CHECK(take_frame(stream) == a);
    CHECK_FALSE(take_frame(stream).has_value());
    stream.insert(stream.end(), fb.begin() + 6, fb.end());
    CHECK(take_frame(stream) == b);
    CHECK(stream.empty());
  }
}
