#pragma once

// Versioned plain-text model checkpoints: a header line of dimensions and
// one "tensor <name> <rows> <cols>" block per parameter, values row-major at
// full double precision.

#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "roadrank/error.hpp"
#include "roadrank/text.hpp"
#include "roadrank/trainer.hpp"

namespace roadrank {

inline constexpr std::string_view kCheckpointMagic = "roadrank-checkpoint v1";

inline void write_checkpoint(const Model& model, std::uint64_t seed, std::ostream& out) {
  out << kCheckpointMagic << '\n';
  const auto& rd = model.ranker.dims;
  out << "ablation=" << to_string(model.ablation);
  if (model.embed) {
    const auto& d = model.embed->dims;
    out << " m=" << d.m << " x=" << d.x << " dim=" << d.dim << " hdim=" << d.hdim()
        << " lstm=" << (model.embed->has_lstm ? 1 : 0);
  }
  out << " in=" << rd.in << " f1=" << rd.f1 << " f2=" << rd.f2 << " rdim=" << rd.rdim
      << " antisymmetric=" << (model.ranker.antisymmetric ? 1 : 0) << " seed=" << seed << '\n';
  model.for_each([&](const std::string& name, const Matrix& t) {
    out << "tensor " << name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (std::size_t q = 0; q < t.size(); ++q) {
      out << (q ? " " : "") << text::format_double(t.data[q]);
    }
    out << '\n';
  });
}

struct LoadedCheckpoint {
  Model model;
  std::uint64_t seed = 0;
};

inline LoadedCheckpoint read_checkpoint(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kCheckpointMagic) {
    throw invalid_input(origin + ": not a checkpoint (bad magic line)");
  }
  if (!std::getline(in, line)) throw invalid_input(origin + ": missing header");
  std::map<std::string, std::string> header;
  for (auto field : text::split(text::trim(line), ' ')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw invalid_input(origin + ": bad header field");
    header[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
  }
  auto get = [&](const char* key) -> std::size_t {
    const auto it = header.find(key);
    const auto v = it == header.end() ? std::nullopt : text::parse_uint(it->second);
    if (!v) throw invalid_input(origin + ": header lacks " + key);
    return static_cast<std::size_t>(*v);
  };
  LoadedCheckpoint out;
  auto& model = out.model;
  if (!header.count("ablation")) throw invalid_input(origin + ": header lacks ablation");
  model.ablation = parse_ablation(header["ablation"]);
  out.seed = get("seed");
  if (apply_ablation(model.ablation).use_embedding) {
    const auto dims = EmbedDims::from_hdim(get("m"), get("x"), get("hdim"));
    model.embed = EmbedParams::zeros(dims, get("lstm") != 0);
  }
  model.ranker = RankerParams::zeros({get("in"), get("f1"), get("f2"), get("rdim")});
  model.ranker.antisymmetric = get("antisymmetric") != 0;
  if (model.embed && model.embed->out_width() != model.ranker.dims.in) {
    throw invalid_input(origin + ": ranker input width does not match the encoder");
  }

  std::map<std::string, Matrix*> slots;
  model.for_each([&](const std::string& name, Matrix& t) { slots[name] = &t; });
  std::size_t loaded = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto head = text::split(text::trim(line), ' ');
    if (head.size() != 4 || head[0] != "tensor") {
      throw invalid_input(origin + ": expected a tensor header, got '" + line + "'");
    }
    const auto it = slots.find(std::string(head[1]));
    if (it == slots.end()) {
      throw invalid_input(origin + ": unexpected tensor '" + std::string(head[1]) + "'");
    }
    auto& t = *it->second;
    const auto rows = text::parse_uint(head[2]), cols = text::parse_uint(head[3]);
    if (!rows || !cols || *rows != t.rows || *cols != t.cols) {
      throw invalid_input(origin + ": tensor '" + it->first + "' has the wrong shape");
    }
    if (!std::getline(in, line)) throw invalid_input(origin + ": truncated tensor " + it->first);
    const auto values = text::split(text::trim(line), ' ');
    if (values.size() != t.size()) {
      throw invalid_input(origin + ": tensor '" + it->first + "' has the wrong value count");
    }
    for (std::size_t q = 0; q < t.size(); ++q) {
      const auto v = text::parse_double(values[q]);
      if (!v || !std::isfinite(*v)) throw invalid_input(origin + ": bad value in " + it->first);
      t.data[q] = *v;
    }
    slots.erase(it);
    ++loaded;
  }
  if (!slots.empty()) {
    throw invalid_input(origin + ": missing tensor '" + slots.begin()->first + "'");
  }
  return out;
}

}  // namespace roadrank
