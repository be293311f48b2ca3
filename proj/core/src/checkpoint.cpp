#include "agdc/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "agdc/error.hpp"

namespace agdc {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'A', 'G', 'D', 'C', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_string(std::istream& in, std::uint32_t limit) {
  const std::uint32_t n = get_u32(in);
  if (n > limit) throw FormatError("checkpoint: string length " + std::to_string(n) + " too large");
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw FormatError("checkpoint: truncated");
  return s;
}

json header(const Model& model) {
  const SchemaSpec& s = model.schema();
  const ModelConfig& m = model.model_config();
  const DiffusionConfig& d = model.diffusion_config();
  return json{{"schema", {{"num_classes", s.num_classes()},
                          {"cont_dim", s.cont_dim()},
                          {"coord_min", s.coord_min()},
                          {"coord_max", s.coord_max()}}},
              {"model", {{"d_model", m.d_model},
                         {"layers", m.layers},
                         {"heads", m.heads},
                         {"max_len", m.max_len},
                         {"seed", m.seed},
                         {"init_std", m.init_std},
                         {"dropout", m.dropout}}},
              {"diffusion", {{"steps", d.steps},
                             {"schedule", to_string(d.kind)},
                             {"blocks", d.blocks},
                             {"width", d.width}}},
              {"eos_alpha", model.eos_alpha()}};
}

struct Header {
  json j;
  std::map<std::string, Matrix> groups;
};

Header read_all(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("checkpoint: bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Header h;
  try {
    h.j = json::parse(get_string(in, 1u << 20));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t g = 0; g < count; ++g) {
    std::string name = get_string(in, 4096);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) {
      throw FormatError("checkpoint: group " + name + " too large");
    }
    Matrix v(rows, cols);
    std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols * 4);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw FormatError("checkpoint: truncated group " + name);
    }
    for (std::size_t i = 0; i < raw.size() / 4; ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                                 (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                                 (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                                 (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
      v.data()[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!h.groups.emplace(std::move(name), std::move(v)).second) {
      throw FormatError("checkpoint: duplicate group");
    }
  }
  return h;
}

void fill(Model& model, std::map<std::string, Matrix>& groups) {
  for (auto& [name, p] : model.params()) {
    auto it = groups.find(name);
    if (it == groups.end()) throw FormatError("checkpoint: missing group " + name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
      throw FormatError("checkpoint: shape mismatch for " + name + ": file " +
                        std::to_string(it->second.rows()) + "x" + std::to_string(it->second.cols()) +
                        ", model " + std::to_string(p.value.rows()) + "x" +
                        std::to_string(p.value.cols()));
    }
  }
  if (groups.size() != model.params().size()) {
    for (const auto& [name, _] : groups) {
      if (!model.params().contains(name)) throw FormatError("checkpoint: unexpected group " + name);
    }
  }
  for (auto& [name, p] : model.params()) p.value = std::move(groups.at(name));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kCheckpointVersion);
  const std::string h = header(model).dump();
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  put_u32(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, p] : model.params()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
    for (ad::Index i = 0; i < p.value.size(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p.value.data()[i])));
    }
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_checkpoint(out, model);
}

std::unique_ptr<Model> read_checkpoint(std::istream& in) {
  Header h = read_all(in);
  std::unique_ptr<Model> model;
  try {
    const json& s = h.j.at("schema");
    const json& m = h.j.at("model");
    const json& d = h.j.at("diffusion");
    SchemaSpec schema(s.at("num_classes").get<int>(), s.at("cont_dim").get<int>(),
                      s.at("coord_min").get<double>(), s.at("coord_max").get<double>());
    ModelConfig mc{.d_model = m.at("d_model").get<int>(),
                   .layers = m.at("layers").get<int>(),
                   .heads = m.at("heads").get<int>(),
                   .max_len = m.at("max_len").get<int>(),
                   .seed = m.at("seed").get<std::uint64_t>(),
                   .init_std = m.at("init_std").get<double>(),
                   .dropout = m.at("dropout").get<double>()};
    DiffusionConfig dc{.steps = d.at("steps").get<int>(),
                       .kind = parse_schedule_kind(d.at("schedule").get<std::string>()),
                       .blocks = d.at("blocks").get<int>(),
                       .width = d.at("width").get<int>()};
    model = std::make_unique<Model>(schema, mc, dc);
    model->set_eos_alpha(h.j.at("eos_alpha").get<double>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  fill(*model, h.groups);
  return model;
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

void load_parameters(std::istream& in, Model& model) {
  Header h = read_all(in);
  if (h.j.value("schema", json{}) != header(model).at("schema") ||
      h.j.value("model", json{}) != header(model).at("model") ||
      h.j.value("diffusion", json{}) != header(model).at("diffusion")) {
    throw FormatError("checkpoint: configuration does not match model");
  }
  fill(model, h.groups);
}

}  // namespace agdc
