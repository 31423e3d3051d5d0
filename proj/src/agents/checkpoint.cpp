#include "relay/agents/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "relay/errors.hpp"
#include "relay/numcore/tensor.hpp"
#include "relay/worldgen/vocab.hpp"

namespace relay::agents {

using nlohmann::json;
using num::Tensor;

namespace {

constexpr char kMagic[4] = {'R', 'L', 'Y', 'C'};
constexpr std::uint32_t kVersion = 1;

void wr(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void wr_u32(std::ostream& os, std::uint32_t v) { wr(os, &v, sizeof v); }
void wr_u64(std::ostream& os, std::uint64_t v) { wr(os, &v, sizeof v); }
void wr_str(std::ostream& os, const std::string& s) {
  wr_u32(os, static_cast<std::uint32_t>(s.size()));
  wr(os, s.data(), s.size());
}
void wr_tensor_data(std::ostream& os, const Tensor& t) {
  wr(os, t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
}

void rd(std::istream& is, void* p, std::size_t n, const std::string& path) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw IoError("checkpoint '" + path + "' is truncated");
  }
}
std::uint32_t rd_u32(std::istream& is, const std::string& path) {
  std::uint32_t v = 0;
  rd(is, &v, sizeof v, path);
  return v;
}
std::uint64_t rd_u64(std::istream& is, const std::string& path) {
  std::uint64_t v = 0;
  rd(is, &v, sizeof v, path);
  return v;
}
std::string rd_str(std::istream& is, const std::string& path,
                   std::uint32_t max_len) {
  const std::uint32_t n = rd_u32(is, path);
  if (n > max_len) {
    throw IoError("checkpoint '" + path + "' declares an implausible " +
                  std::to_string(n) + "-byte string");
  }
  std::string s(n, '\0');
  rd(is, s.data(), n, path);
  return s;
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"d_enc", cfg.d_enc},
              {"d", cfg.d},
              {"d_adp", cfg.d_adp},
              {"n_enc", cfg.n_enc},
              {"n_coord", cfg.n_coord},
              {"n_cap", cfg.n_cap},
              {"patch", cfg.patch},
              {"K", cfg.K},
              {"mlp_mult", cfg.mlp_mult},
              {"query_vocab", cfg.query_vocab},
              {"caption_vocab", cfg.caption_vocab},
              {"answer_vocab", cfg.answer_vocab}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  try {
    cfg.d_enc = j.at("d_enc").get<int>();
    cfg.d = j.at("d").get<int>();
    cfg.d_adp = j.at("d_adp").get<int>();
    cfg.n_enc = j.at("n_enc").get<int>();
    cfg.n_coord = j.at("n_coord").get<int>();
    cfg.n_cap = j.at("n_cap").get<int>();
    cfg.patch = j.at("patch").get<int>();
    cfg.K = j.at("K").get<int>();
    cfg.mlp_mult = j.at("mlp_mult").get<int>();
    // Vocabulary sizes default to the compiled tables; configs only state
    // them to pin a checkpoint against a different build.
    cfg.query_vocab = j.value("query_vocab", cfg.query_vocab);
    cfg.caption_vocab = j.value("caption_vocab", cfg.caption_vocab);
    cfg.answer_vocab = j.value("answer_vocab", cfg.answer_vocab);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config json: ") + e.what());
  }
  check_model_config(cfg);
  return cfg;
}

std::vector<std::uint64_t> current_vocab_hashes() {
  return {world::query_vocab().hash(), world::answer_vocab().hash(),
          world::caption_vocab().hash()};
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  check_model_config(ck.model);
  if (ck.has_opt() && !ck.opt.matches(ck.params)) {
    throw ContractError("optimiser state does not match the parameter store");
  }
  for (std::size_t i = 1; i < ck.stages_done.size(); ++i) {
    if (ck.stages_done[i] <= ck.stages_done[i - 1]) {
      throw ContractError("stage history must be strictly ascending");
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");

  json head;
  head["model"] = model_config_to_json(ck.model);
  head["run"] = ck.run_config;
  head["stages"] = ck.stages_done;
  std::vector<std::string> hashes;
  hashes.reserve(ck.vocab_hashes.size());
  for (std::uint64_t h : ck.vocab_hashes) hashes.push_back(std::to_string(h));
  head["vocab_hashes"] = hashes;

  wr(os, kMagic, sizeof kMagic);
  wr_u32(os, kVersion);
  wr_str(os, head.dump());

  wr_u32(os, static_cast<std::uint32_t>(ck.params.count()));
  for (int i = 0; i < ck.params.count(); ++i) {
    const Tensor& t = ck.params.value_at(i);
    wr_str(os, ck.params.name_at(i));
    wr_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int r = 0; r < t.rank(); ++r)
      wr_u32(os, static_cast<std::uint32_t>(t.dim(r)));
    wr_tensor_data(os, t);
  }

  os.put(ck.has_opt() ? 1 : 0);
  if (ck.has_opt()) {
    wr_u64(os, static_cast<std::uint64_t>(ck.opt.step));
    for (const Tensor& t : ck.opt.m) wr_tensor_data(os, t);
    for (const Tensor& t : ck.opt.v) wr_tensor_data(os, t);
  }
  os.flush();
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");

  char magic[4];
  rd(is, magic, sizeof magic, path);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError("'" + path + "' is not a checkpoint file");
  }
  const std::uint32_t version = rd_u32(is, path);
  if (version != kVersion) {
    throw IoError("checkpoint '" + path + "' has schema version " +
                  std::to_string(version) + ", this build reads " +
                  std::to_string(kVersion));
  }

  Checkpoint ck;
  json head;
  try {
    head = json::parse(rd_str(is, path, 1u << 20));
    ck.model = model_config_from_json(head.at("model"));
    ck.run_config = head.at("run");
    ck.stages_done = head.at("stages").get<std::vector<int>>();
    for (const std::string& h :
         head.at("vocab_hashes").get<std::vector<std::string>>()) {
      ck.vocab_hashes.push_back(std::stoull(h));
    }
  } catch (const json::exception& e) {
    throw IoError("checkpoint '" + path + "' header: " + e.what());
  }

  if (ck.vocab_hashes != current_vocab_hashes()) {
    throw ContractError(
        "checkpoint '" + path +
        "' was written against different vocabularies; refusing to load");
  }

  const std::uint32_t n_params = rd_u32(is, path);
  if (n_params > 1u << 16) {
    throw IoError("checkpoint '" + path + "' declares an implausible " +
                  std::to_string(n_params) + " parameters");
  }
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = rd_str(is, path, 1u << 10);
    const std::uint32_t rank = rd_u32(is, path);
    if (rank > 4) throw IoError("checkpoint '" + path + "' tensor rank > 4");
    std::vector<int> shape;
    std::int64_t size = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = rd_u32(is, path);
      if (d == 0 || d > 1u << 24) {
        throw IoError("checkpoint '" + path + "' has a degenerate dimension");
      }
      shape.push_back(static_cast<int>(d));
      size *= d;
    }
    Tensor t(shape);
    rd(is, t.data(), static_cast<std::size_t>(size) * sizeof(double), path);
    ck.params.add(name, std::move(t));
  }

  char has_opt = 0;
  rd(is, &has_opt, 1, path);
  if (has_opt) {
    ck.opt.step = static_cast<std::int64_t>(rd_u64(is, path));
    auto read_like_params = [&](std::vector<Tensor>& dst) {
      for (int i = 0; i < ck.params.count(); ++i) {
        Tensor t(ck.params.value_at(i).shape());
        rd(is, t.data(), static_cast<std::size_t>(t.size()) * sizeof(double),
           path);
        dst.push_back(std::move(t));
      }
    };
    read_like_params(ck.opt.m);
    read_like_params(ck.opt.v);
    if (!ck.opt.matches(ck.params)) {
      throw IoError("checkpoint '" + path +
                    "' optimiser state does not match its parameters");
    }
  }
  return ck;
}

}  // namespace relay::agents
