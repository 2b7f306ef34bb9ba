#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "memtangle/errors.hpp"
#include "memtangle/model.hpp"

namespace memtangle {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'D', 'M', 'W'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "MDMW writer assumes a little-endian host");

json cfg_to_json(const TrainConfig& cfg) {
  return json{{"alpha", cfg.alpha},
              {"tau", cfg.tau},
              {"lr", cfg.lr},
              {"weight_decay", cfg.weight_decay},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"eps", cfg.eps},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"d_h", cfg.d_h},
              {"hidden", cfg.hidden}};
}

TrainConfig cfg_from_json(const json& j) {
  TrainConfig cfg;
  cfg.alpha = j.at("alpha").get<double>();
  cfg.tau = j.at("tau").get<double>();
  cfg.lr = j.at("lr").get<double>();
  cfg.weight_decay = j.at("weight_decay").get<double>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.eps = j.at("eps").get<double>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.d_h = j.at("d_h").get<std::size_t>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  return cfg;
}

void write_tensor(std::ofstream& out, const double* data, std::size_t n) {
  std::vector<float> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
}

void read_tensor(std::ifstream& in, double* data, std::size_t n,
                 const std::filesystem::path& path) {
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!in)
    throw DataError("checkpoint: truncated tensor data in " + path.string());
  for (std::size_t i = 0; i < n; ++i) data[i] = buf[i];
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::variant<StraightforwardModel,
                                        DisentangledModel>& model,
                     const TrainConfig& cfg, std::uint32_t d_f,
                     std::uint32_t d_c) {
  json header;
  header["method"] =
      std::holds_alternative<DisentangledModel>(model) ? "disentangled"
                                                       : "straightforward";
  header["d_f"] = d_f;
  header["d_c"] = d_c;
  header["config"] = cfg_to_json(cfg);
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open " + path.string() +
                            " for writing");
  out.write(kMagic, 4);
  std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  auto header_len = static_cast<std::uint32_t>(header_text.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  // The const_cast is view-only: param_views needs mutable access for the
  // optimizer path but we never write through it here.
  auto views = std::visit(
      [](auto& m) {
        return param_views(const_cast<std::remove_cvref_t<decltype(m)>&>(m));
      },
      model);
  for (const auto& v : views) write_tensor(out, v.data, v.size);
  out.flush();
  if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0, header_len = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in) throw DataError("checkpoint: truncated header in " + path.string());
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version) + " in " + path.string());
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw DataError("checkpoint: truncated header in " + path.string());

  Checkpoint ckpt;
  std::string method;
  try {
    json header = json::parse(header_text);
    method = header.at("method").get<std::string>();
    ckpt.d_f = header.at("d_f").get<std::uint32_t>();
    ckpt.d_c = header.at("d_c").get<std::uint32_t>();
    ckpt.cfg = cfg_from_json(header.at("config"));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: bad header JSON: ") + e.what());
  }
  ckpt.cfg.validate();

  if (method == "straightforward") {
    TrainConfig zero_cfg = ckpt.cfg;
    ckpt.model = init_straightforward(ckpt.d_f, ckpt.d_c, zero_cfg);
  } else if (method == "disentangled") {
    ckpt.model = init_disentangled(ckpt.d_f, ckpt.d_c, ckpt.cfg);
  } else {
    throw DataError("checkpoint: unknown method '" + method + "'");
  }

  auto views = std::visit([](auto& m) { return param_views(m); }, ckpt.model);
  for (const auto& v : views) read_tensor(in, v.data, v.size, path);
  char extra;
  if (in.read(&extra, 1))
    throw DataError("checkpoint: trailing bytes in " + path.string());
  return ckpt;
}

}  // namespace memtangle
