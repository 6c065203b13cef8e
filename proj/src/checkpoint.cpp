#include "red/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace red::ad {

namespace {
constexpr char kMagic[8] = {'R', 'E', 'D', 'C', 'K', 'P', 'T', '\0'};
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParam>& params, int64_t step) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["step"] = step;
  nlohmann::json list = nlohmann::json::array();
  for (const NamedParam& p : params) {
    list.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  manifest["params"] = list;
  const std::string json = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 8);
  const uint64_t len = json.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
  for (const NamedParam& p : params) {
    out.write(reinterpret_cast<const char*>(p.tensor.data()),
              static_cast<std::streamsize>(p.tensor.size() * 8));
  }
  if (!out) throw Error("write failed for " + path.string());
}

int64_t load_checkpoint(const std::filesystem::path& path,
                        std::vector<NamedParam>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(path.string() + ": not a checkpoint file (bad magic)");
  }
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string json(len, '\0');
  in.read(json.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(path.string() + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  const auto& list = manifest.at("params");
  if (list.size() != params.size()) {
    throw Error(path.string() + ": manifest has " +
                std::to_string(list.size()) + " params, expected " +
                std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string name = list[i].at("name").get<std::string>();
    const auto shape = list[i].at("shape").get<Shape>();
    if (name != params[i].name) {
      throw Error(path.string() + ": param " + std::to_string(i) + " is '" +
                  name + "', expected '" + params[i].name + "'");
    }
    if (shape != params[i].tensor.shape()) {
      throw Error(path.string() + ": shape mismatch for '" + name + "': " +
                  shape_str(shape) + " vs " +
                  shape_str(params[i].tensor.shape()));
    }
    in.read(reinterpret_cast<char*>(params[i].tensor.data()),
            static_cast<std::streamsize>(params[i].tensor.size() * 8));
  }
  if (!in) throw Error(path.string() + ": truncated parameter blob");
  return manifest.at("step").get<int64_t>();
}

}  // namespace red::ad
