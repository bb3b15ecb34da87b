#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "trojanq/error.hpp"
#include "trojanq/tensor_formats.hpp"
#include "trojanq/weights_io.hpp"

namespace trojanq {
namespace {

using testing::TempDir;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected trojanq::Error";
  return ErrorCode::IoError;
}

std::vector<double> iota_values(std::size_t n, double scale = 1.0) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(i) * scale;
  return out;
}

TEST(WeightMatrix, RejectsTooFewRowsAndEmptyCols) {
  EXPECT_EQ(code_of([] { WeightMatrix(1, 3, {1, 2, 3}); }), ErrorCode::InvalidMatrix);
  EXPECT_EQ(code_of([] { WeightMatrix(2, 0, {}); }), ErrorCode::InvalidMatrix);
  EXPECT_EQ(code_of([] { WeightMatrix(2, 2, {1, 2, 3}); }), ErrorCode::InvalidMatrix);
}

TEST(WeightMatrix, RejectsNonFiniteWithIndex) {
  std::vector<double> v(6, 0.0);
  v[4] = std::numeric_limits<double>::infinity();
  try {
    WeightMatrix(2, 3, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    EXPECT_EQ(e.index(), 4u);
  }
}

TEST(WeightMatrix, RejectsWrongLabelCount) {
  EXPECT_EQ(code_of([] { WeightMatrix(2, 2, {1, 2, 3, 4}, {"a"}); }), ErrorCode::InvalidMatrix);
}

TEST(WeightMatrix, TransposeTwiceIsIdentity) {
  WeightMatrix m(3, 4, iota_values(12));
  const auto t = m.transposed();
  EXPECT_EQ(t.rows(), 4u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), m(2, 1));
  EXPECT_EQ(t.transposed(), m);
}

TEST(LoadWeights, JsonExample) {
  TempDir dir;
  testing::write_text(dir / "w.json", R"({"weights": [[1,2],[3,4]], "class_labels": ["a","b"]})");
  TensorSelector sel;
  sel.orientation = Orientation::RowsAreClasses;
  const auto m = load_weight_matrix(dir / "w.json", Format::Auto, sel);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 2u);
  EXPECT_EQ(std::vector<double>(m.values().begin(), m.values().end()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(m.class_labels(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(m.source().format, Format::Json);
}

TEST(LoadWeights, JsonAutoMeansRowsAreClasses) {
  TempDir dir;
  testing::write_text(dir / "w.json", R"({"weights": [[1,2,3],[4,5,6],[7,8,9]]})");
  const auto m = load_weight_matrix(dir / "w.json");
  EXPECT_EQ(m(0, 2), 3.0);
  EXPECT_EQ(m.source().orientation, Orientation::RowsAreClasses);
}

TEST(LoadWeights, JsonIgnoresBias) {
  TempDir dir;
  testing::write_text(dir / "w.json", R"({"weights": [[1,2],[3,4],[5,6]], "bias": [0.5, 0.5, 0.5]})");
  EXPECT_EQ(load_weight_matrix(dir / "w.json").rows(), 3u);
}

TEST(LoadWeights, NpyFloat32AutoPicksSmallerDimension) {
  TempDir dir;
  const auto values = iota_values(4 * 128, 0.25);
  testing::write_bytes(dir / "w.npy", testing::make_npy("<f4", "(4, 128)", values));
  const auto m = load_weight_matrix(dir / "w.npy");
  EXPECT_EQ(m.rows(), 4u);
  EXPECT_EQ(m.cols(), 128u);
  EXPECT_TRUE(m.source().orientation_inferred);
  EXPECT_EQ(m(1, 3), static_cast<double>(static_cast<float>(131 * 0.25)));
}

TEST(LoadWeights, NpyAutoTransposesWhenClassesAreColumns) {
  TempDir dir;
  const auto values = iota_values(128 * 4);
  testing::write_bytes(dir / "w.npy", testing::make_npy("<f8", "(128, 4)", values));
  const auto m = load_weight_matrix(dir / "w.npy");
  EXPECT_EQ(m.rows(), 4u);
  EXPECT_EQ(m.cols(), 128u);
  EXPECT_EQ(m.source().orientation, Orientation::ColsAreClasses);
  EXPECT_EQ(m(2, 5), values[5 * 4 + 2]);
}

TEST(LoadWeights, ExplicitColsOrientationTransposes) {
  TempDir dir;
  const auto values = iota_values(6);
  testing::write_bytes(dir / "w.npy", testing::make_npy("<f8", "(2, 3)", values));
  TensorSelector sel;
  sel.orientation = Orientation::ColsAreClasses;
  const auto cols = load_weight_matrix(dir / "w.npy", Format::Npy, sel);
  sel.orientation = Orientation::RowsAreClasses;
  const auto rows = load_weight_matrix(dir / "w.npy", Format::Npy, sel);
  EXPECT_EQ(cols, rows.transposed());
}

TEST(LoadWeights, SquareNpyWithAutoIsAmbiguous) {
  TempDir dir;
  testing::write_bytes(dir / "w.npy", testing::make_npy("<f8", "(3, 3)", iota_values(9)));
  EXPECT_EQ(code_of([&] { load_weight_matrix(dir / "w.npy"); }), ErrorCode::AmbiguousOrientation);
}

TEST(LoadWeights, NanReportsFlatIndex) {
  TempDir dir;
  auto values = iota_values(4 * 6);
  values[7] = std::numeric_limits<double>::quiet_NaN();
  testing::write_bytes(dir / "w.npy", testing::make_npy("<f4", "(4, 6)", values));
  try {
    load_weight_matrix(dir / "w.npy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    EXPECT_EQ(e.index(), 7u);
  }
}

TEST(LoadWeights, NanIndexIsInFileOrderAfterTranspose) {
  TempDir dir;
  auto values = iota_values(6 * 2);
  values[7] = std::numeric_limits<double>::infinity();
  testing::write_bytes(dir / "w.npy", testing::make_npy("<f8", "(6, 2)", values));
  try {
    load_weight_matrix(dir / "w.npy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.index(), 7u);
  }
}

TEST(LoadWeights, MissingFile) {
  EXPECT_EQ(code_of([] { load_weight_matrix("/nonexistent/trojanq/w.npy"); }), ErrorCode::FileNotFound);
}

TEST(LoadWeights, FormatDetectionBySniffing) {
  TempDir dir;
  testing::write_bytes(dir / "blob", testing::make_npy("<f8", "(2, 3)", iota_values(6)));
  EXPECT_EQ(detect_format(dir / "blob"), Format::Npy);
  testing::write_text(dir / "blob2", R"({"weights": [[1],[2]]})");
  EXPECT_EQ(detect_format(dir / "blob2"), Format::Json);
  const auto payload = testing::f32_payload(iota_values(6));
  testing::write_bytes(dir / "blob3",
                       testing::make_safetensors(R"({"w":{"dtype":"F32","shape":[2,3],"data_offsets":[0,24]}})",
                                                 payload));
  EXPECT_EQ(detect_format(dir / "blob3"), Format::Safetensors);
  testing::write_text(dir / "blob4", "plain text");
  EXPECT_EQ(code_of([&] { detect_format(dir / "blob4"); }), ErrorCode::UnsupportedFormat);
}

TEST(LoadWeights, SafetensorsSingleTensor) {
  TempDir dir;
  const auto values = iota_values(3 * 5, 0.5);
  const auto payload = testing::f64_payload(values);
  testing::write_bytes(dir / "w.safetensors",
                       testing::make_safetensors(
                           R"({"__metadata__":{"k":"v"},"fc.weight":{"dtype":"F64","shape":[3,5],"data_offsets":[0,120]}})",
                           payload));
  const auto m = load_weight_matrix(dir / "w.safetensors");
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 5u);
  EXPECT_EQ(m(2, 4), 7.0);
  EXPECT_EQ(m.source().tensor_name, "fc.weight");
}

TEST(LoadWeights, SafetensorsNamedTensorSelection) {
  TempDir dir;
  auto payload = testing::f32_payload(iota_values(6));
  const auto second = testing::f32_payload(iota_values(8, 2.0));
  payload.insert(payload.end(), second.begin(), second.end());
  const char* header =
      R"({"a":{"dtype":"F32","shape":[2,3],"data_offsets":[0,24]},"b":{"dtype":"F32","shape":[2,4],"data_offsets":[24,56]}})";
  testing::write_bytes(dir / "w.safetensors", testing::make_safetensors(header, payload));
  EXPECT_EQ(code_of([&] { load_weight_matrix(dir / "w.safetensors"); }), ErrorCode::TensorNotFound);

  TensorSelector sel;
  sel.tensor_name = "b";
  const auto m = load_weight_matrix(dir / "w.safetensors", Format::Auto, sel);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(1, 3), 14.0);

  sel.tensor_name = "missing";
  EXPECT_EQ(code_of([&] { load_weight_matrix(dir / "w.safetensors", Format::Auto, sel); }),
            ErrorCode::TensorNotFound);
}

TEST(SaveWeights, NpyRoundTripIsBitwise) {
  TempDir dir;
  std::vector<double> values(15);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = static_cast<double>(k) / 7.0;
  const WeightMatrix m(3, 5, values);
  save_weight_matrix(m, dir / "m.npy", Format::Npy);
  TensorSelector sel;
  sel.orientation = Orientation::RowsAreClasses;
  const auto back = load_weight_matrix(dir / "m.npy", Format::Auto, sel);
  EXPECT_EQ(back, m);
}

TEST(SaveWeights, JsonIdentityRoundTrip) {
  TempDir dir;
  const WeightMatrix eye(2, 2, {1, 0, 0, 1}, {"x", "y"});
  save_weight_matrix(eye, dir / "eye.json", Format::Json);
  const auto back = load_weight_matrix(dir / "eye.json");
  EXPECT_EQ(back, eye);
  EXPECT_EQ(back.class_labels(), eye.class_labels());
}

TEST(SaveWeights, JsonRoundTripPreservesDoubles) {
  TempDir dir;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist(0.0, 3.0);
  std::vector<double> values(4 * 9);
  for (double& v : values) v = dist(rng);
  const WeightMatrix m(4, 9, values);
  save_weight_matrix(m, dir / "m.json", Format::Json);
  EXPECT_EQ(load_weight_matrix(dir / "m.json"), m);
}

TEST(SaveWeights, UnwritablePathIsIoError) {
  const WeightMatrix m(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(code_of([&] { save_weight_matrix(m, "/nonexistent/dir/m.npy", Format::Npy); }), ErrorCode::IoError);
}

TEST(SaveWeights, SafetensorsIsReadOnly) {
  TempDir dir;
  const WeightMatrix m(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(code_of([&] { save_weight_matrix(m, dir / "m.safetensors", Format::Safetensors); }),
            ErrorCode::UnsupportedFormat);
}

TEST(Npy, EncoderAlignsDataAndParsesBack) {
  const auto values = iota_values(10);
  const auto bytes = encode_npy(2, 5, values);
  const auto header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0u);
  const auto raw = parse_npy(bytes);
  EXPECT_EQ(raw.dim0, 2u);
  EXPECT_EQ(raw.dim1, 5u);
  EXPECT_EQ(raw.data, values);
}

TEST(Npy, MalformedInputsCarryTypedErrors) {
  const auto good = testing::make_npy("<f8", "(2, 2)", iota_values(4));
  auto bad_magic = good;
  bad_magic[1] = std::byte{'X'};
  EXPECT_EQ(code_of([&] { parse_npy(bad_magic); }), ErrorCode::MalformedHeader);

  auto v2 = good;
  v2[6] = std::byte{2};
  try {
    parse_npy(v2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedFormat);
    EXPECT_EQ(e.byte_offset(), 6u);
  }

  const auto fortran = testing::make_npy("<f8", "(2, 2)", iota_values(4), true);
  EXPECT_EQ(code_of([&] { parse_npy(fortran); }), ErrorCode::UnsupportedFormat);
  const auto three_d = testing::make_npy("<f8", "(1, 2, 2)", iota_values(4));
  EXPECT_EQ(code_of([&] { parse_npy(three_d); }), ErrorCode::UnsupportedFormat);
  const auto ints = testing::make_npy("<i4", "(2, 2)", iota_values(2));
  EXPECT_EQ(code_of([&] { parse_npy(ints); }), ErrorCode::UnsupportedFormat);

  auto truncated = good;
  truncated.resize(truncated.size() - 3);
  EXPECT_EQ(code_of([&] { parse_npy(truncated); }), ErrorCode::MalformedHeader);
  std::vector<std::byte> tiny(good.begin(), good.begin() + 5);
  EXPECT_EQ(code_of([&] { parse_npy(tiny); }), ErrorCode::MalformedHeader);
}

TEST(Safetensors, MalformedInputsCarryTypedErrors) {
  const auto payload = testing::f32_payload(iota_values(4));
  EXPECT_EQ(code_of([&] { parse_safetensors(testing::make_safetensors("{not json", payload), std::nullopt); }),
            ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([&] {
              parse_safetensors(
                  testing::make_safetensors(R"({"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,12]}})", payload),
                  std::nullopt);
            }),
            ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([&] {
              parse_safetensors(
                  testing::make_safetensors(R"({"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,64]}})", payload),
                  std::nullopt);
            }),
            ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([&] {
              parse_safetensors(
                  testing::make_safetensors(R"({"w":{"dtype":"I32","shape":[2,2],"data_offsets":[0,16]}})", payload),
                  std::string("w"));
            }),
            ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code_of([&] {
              parse_safetensors(
                  testing::make_safetensors(R"({"w":{"dtype":"F16","shape":[2,2],"data_offsets":[0,8]}})", payload),
                  std::nullopt);
            }),
            ErrorCode::UnsupportedFormat);
  std::vector<std::byte> short_prefix(4, std::byte{0});
  EXPECT_EQ(code_of([&] { parse_safetensors(short_prefix, std::nullopt); }), ErrorCode::MalformedHeader);
}

TEST(JsonWeights, MalformedInputsCarryTypedErrors) {
  for (const char* text : {"", "[1,2]", R"({"weights": 3})", R"({"weights": [[1,2],[3]]})",
                           R"({"weights": [[1,"a"],[3,4]]})", R"({"weights": [[1,2],[3,4]], "class_labels": [1,2]})",
                           R"({"weights": [[1,2],[3,4]], "class_labels": ["a"]})",
                           R"({"weights": [[1,2],[3,4]], "bias": [1,2,3]})", R"({"nope": [[1]]})"}) {
    EXPECT_EQ(code_of([&] { parse_json_weights(text); }), ErrorCode::MalformedHeader) << text;
  }
}

TEST(FormatNames, ParseAndPrint) {
  for (auto f : {Format::Json, Format::Npy, Format::Safetensors, Format::Auto}) {
    EXPECT_EQ(parse_format(to_string(f)), f);
  }
  for (auto o : {Orientation::RowsAreClasses, Orientation::ColsAreClasses, Orientation::Auto}) {
    EXPECT_EQ(parse_orientation(to_string(o)), o);
  }
  EXPECT_EQ(code_of([] { parse_format("hdf5"); }), ErrorCode::UnsupportedFormat);
}

}  // namespace
}  // namespace trojanq
