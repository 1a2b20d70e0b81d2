#include "disamgnn/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace disamgnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "disamgnn-checkpoint";

void put_f64le(std::string& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_f64le(const std::string& in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

fs::path blob_path(const fs::path& manifest) {
  fs::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const fs::path& manifest) {
  std::string blob;
  blob.reserve(params.scalar_count() * 8);
  json entries = json::array();
  for (const auto& p : params.params) {
    entries.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", blob.size()}});
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put_f64le(blob, p.value.data()[i]);
  }
  const fs::path blob_file = blob_path(manifest);
  const json j{{"format", kFormat},
               {"version", 1},
               {"dtype", "f64le"},
               {"backbone", std::string(to_string(params.config.backbone))},
               {"hidden", params.config.hidden},
               {"layers", params.config.layers},
               {"sgc_k", params.config.sgc_k},
               {"dropout", params.config.dropout},
               {"in_dim", params.in_dim},
               {"num_classes", params.num_classes},
               {"blob", blob_file.filename().string()},
               {"blob_bytes", blob.size()},
               {"params", entries}};
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  {
    std::ofstream out(manifest);
    if (!out) throw std::runtime_error("cannot write " + manifest.string());
    out << j.dump(2) << '\n';
  }
  std::ofstream out(blob_file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + blob_file.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

namespace {

[[noreturn]] void corrupt(const std::string& what) {
  throw std::runtime_error("corrupt checkpoint manifest: " + what);
}

}  // namespace

ModelParams load_checkpoint(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open checkpoint " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    corrupt(e.what());
  }

  try {
    if (j.at("format").get<std::string>() != kFormat || j.at("dtype").get<std::string>() != "f64le") {
      corrupt("unsupported format");
    }
    ModelConfig cfg;
    cfg.backbone = parse_backbone(j.at("backbone").get<std::string>());
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.sgc_k = j.at("sgc_k").get<std::size_t>();
    cfg.dropout = j.at("dropout").get<double>();
    const auto in_dim = j.at("in_dim").get<std::size_t>();
    const auto num_classes = j.at("num_classes").get<std::size_t>();

    // The expected layout comes from a fresh init; the manifest must match it.
    Rng scratch(0);
    ModelParams mp = init_params(cfg, in_dim, num_classes, scratch);

    const fs::path blob_file = manifest.parent_path() / j.at("blob").get<std::string>();
    std::ifstream bin(blob_file, std::ios::binary);
    if (!bin) corrupt("cannot open blob " + blob_file.string());
    std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (blob.size() != j.at("blob_bytes").get<std::size_t>()) {
      corrupt("blob size disagrees with manifest");
    }

    const auto& entries = j.at("params");
    if (!entries.is_array() || entries.size() != mp.params.size()) {
      corrupt("parameter list does not match backbone layout");
    }
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      auto& p = mp.params[i];
      const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
      if (e.at("name").get<std::string>() != p.name || shape.size() != 2 || shape[0] != p.value.rows() ||
          shape[1] != p.value.cols()) {
        corrupt("entry " + std::to_string(i) + " does not match '" + p.name + "'");
      }
      if (e.at("offset").get<std::size_t>() != expected_offset) {
        corrupt("offset for '" + p.name + "' is inconsistent");
      }
      const auto bytes = static_cast<std::size_t>(p.value.size()) * 8;
      if (expected_offset + bytes > blob.size()) corrupt("blob truncated");
      for (Eigen::Index k = 0; k < p.value.size(); ++k) {
        p.value.data()[k] = get_f64le(blob, expected_offset + static_cast<std::size_t>(k) * 8);
      }
      expected_offset += bytes;
    }
    if (expected_offset != blob.size()) corrupt("blob has trailing bytes");
    return mp;
  } catch (const json::exception& e) {
    corrupt(e.what());
  } catch (const std::invalid_argument& e) {
    corrupt(e.what());
  }
}

}  // namespace disamgnn
