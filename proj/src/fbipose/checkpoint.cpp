#include "fbipose/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

constexpr const char* kFormat = "fbipose-checkpoint";

static_assert(std::endian::native == std::endian::little, "checkpoint tensors are stored little-endian");

nlohmann::json encode_tensor(const Mat<float>& m) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(m.size()) * sizeof(float));
  if (!bytes.empty()) std::memcpy(bytes.data(), m.data(), bytes.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", nlohmann::json::binary(std::move(bytes))}};
}

void decode_tensor(const nlohmann::json& j, const std::string& name, Mat<float>& out) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows != out.rows() || cols != out.cols()) {
    fail(ErrorCode::kParse, "tensor " + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                                ", expected " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
  }
  const auto& bytes = j.at("data").get_binary();
  if (bytes.size() != static_cast<std::size_t>(out.size()) * sizeof(float)) {
    fail(ErrorCode::kParse, "tensor " + name + " has a truncated payload");
  }
  if (!bytes.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  const auto& p = checkpoint.params;
  nlohmann::json tensors = nlohmann::json::object();
  p.visit([&tensors](const std::string& name, const Mat<float>& m, TensorRole, bool) {
    tensors[name] = encode_tensor(m);
  });
  nlohmann::json doc = {
      {"format", kFormat},
      {"version", kCheckpointVersion},
      {"topology_version", SkeletonTopology::standard().version()},
      {"shape", {{"hidden", p.shape.hidden}, {"head_hidden", p.shape.head_hidden}}},
      {"hyper",
       {{"dropout", p.dropout},
        {"bn_momentum", p.bn_momentum},
        {"bn_eps", p.bn_eps},
        {"output_scale_mm", p.output_scale_mm},
        {"fbi_inputs", p.fbi_inputs}}},
      {"tensors", std::move(tensors)},
      {"config", checkpoint.config},
      {"seed", checkpoint.seed},
      {"meta", checkpoint.meta},
  };
  return nlohmann::json::to_cbor(doc);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::from_cbor(bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("not a checkpoint: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat) fail(ErrorCode::kParse, "not a checkpoint");
  try {
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      fail(ErrorCode::kSchemaVersion, "unsupported checkpoint version " + std::to_string(version));
    }
    const int topo = doc.at("topology_version").get<int>();
    if (topo != SkeletonTopology::standard().version()) {
      fail(ErrorCode::kTopologyMismatch, "checkpoint was written for topology version " + std::to_string(topo) +
                                             ", this build uses " +
                                             std::to_string(SkeletonTopology::standard().version()));
    }
    NetShape shape;
    shape.hidden = doc.at("shape").at("hidden").get<int>();
    shape.head_hidden = doc.at("shape").at("head_hidden").get<int>();
    if (shape.hidden < 1 || shape.head_hidden < 1) fail(ErrorCode::kParse, "invalid layer widths");

    Checkpoint c;
    c.params = RegressorParams<float>::zeros(shape);
    const auto& hyper = doc.at("hyper");
    c.params.dropout = hyper.at("dropout").get<float>();
    c.params.bn_momentum = hyper.at("bn_momentum").get<float>();
    c.params.bn_eps = hyper.at("bn_eps").get<float>();
    c.params.output_scale_mm = hyper.at("output_scale_mm").get<double>();
    c.params.fbi_inputs = hyper.at("fbi_inputs").get<bool>();
    const auto& tensors = doc.at("tensors");
    c.params.visit([&tensors](const std::string& name, Mat<float>& m, TensorRole, bool) {
      if (!tensors.contains(name)) fail(ErrorCode::kParse, "checkpoint is missing tensor " + name);
      decode_tensor(tensors.at(name), name, m);
    });
    c.config = doc.at("config");
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.meta = doc.at("meta");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fbipose
