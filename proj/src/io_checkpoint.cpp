#include <cstring>
#include <fstream>
#include <sstream>

#include "physgen/error.hpp"
#include "physgen/io/checkpoint.hpp"

namespace physgen::io {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'G', 'C', 'K', 'P', 'T', '0', '1'};

json arch_json(const nn::Architecture& a) {
  return {{"dim", a.dim}, {"width", a.width}, {"hidden_layers", a.hidden_layers}, {"time_frequencies", a.time_frequencies}};
}

nn::Architecture arch_from(const json& j) {
  nn::Architecture a;
  a.dim = j.at("dim").get<int>();
  a.width = j.at("width").get<int>();
  a.hidden_layers = j.at("hidden_layers").get<int>();
  a.time_frequencies = j.at("time_frequencies").get<int>();
  return a;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const nn::ScoreNetwork& net = model.base;
  const diffusion::VPSchedule& s = net.schedule();
  json channels = json::array();
  for (const Channel& ch : model.meta.channels)
    channels.push_back({{"name", ch.name}, {"rows", ch.rows}, {"cols", ch.cols}, {"mean", ch.mean}, {"std", ch.std}});
  json header = {{"version", kCheckpointVersion},
                 {"architecture", arch_json(net.architecture())},
                 {"schedule", {{"beta_min", s.beta_min}, {"beta_max", s.beta_max}, {"T", s.T}}},
                 {"dataset_hash", model.meta.dataset_hash},
                 {"seed", model.meta.seed},
                 {"channels", channels},
                 {"condition", model.meta.condition},
                 {"extra", model.meta.extra},
                 {"base_parameters", net.parameters().size()}};
  if (net.prior()) header["prior"] = {{"rank", net.prior()->basis.cols()}, {"rest", net.prior()->rest}};
  if (model.augmented) {
    header["augmentation"] = {{"condition_dim", model.augmented->condition_dim()},
                              {"encoder_width", model.augmented->encoder_width()},
                              {"parameters", model.augmented->parameters().size()}};
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(net.parameters().data()),
            static_cast<std::streamsize>(net.parameters().size() * sizeof(double)));
  if (const auto& p = net.prior()) {
    auto put = [&](const double* d, Eigen::Index n) {
      out.write(reinterpret_cast<const char*>(d), static_cast<std::streamsize>(n * sizeof(double)));
    };
    put(p->mean.data(), p->mean.size());
    put(p->lambdas.data(), p->lambdas.size());
    put(p->basis.data(), p->basis.size());
  }
  if (model.augmented)
    out.write(reinterpret_cast<const char*>(model.augmented->parameters().data()),
              static_cast<std::streamsize>(model.augmented->parameters().size() * sizeof(double)));
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path, const nn::Architecture* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) fail(ErrorCode::io, path.string() + " is not a checkpoint");
  if (len > (1u << 24)) fail(ErrorCode::io, "checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorCode::io, "truncated checkpoint header");

  try {
    const json header = json::parse(text);
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion)
      fail(ErrorCode::version, "checkpoint version " + std::to_string(version) + " is not supported");
    const nn::Architecture arch = arch_from(header.at("architecture"));
    if (expected && !(arch == *expected))
      fail(ErrorCode::invalid_argument, "checkpoint architecture does not match the requested architecture");
    diffusion::VPSchedule sched;
    sched.beta_min = header.at("schedule").at("beta_min").get<double>();
    sched.beta_max = header.at("schedule").at("beta_max").get<double>();
    sched.T = header.at("schedule").at("T").get<double>();

    nn::ScoreNetwork net(arch, sched);
    const Eigen::Index base_count = header.at("base_parameters").get<Eigen::Index>();
    if (base_count != net.parameters().size())
      fail(ErrorCode::invalid_argument, "checkpoint parameter count does not match its architecture");
    auto read_block = [&](Eigen::VectorXd& v) {
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
      if (!in) fail(ErrorCode::io, "truncated checkpoint parameters");
    };
    read_block(net.parameters());
    if (header.contains("prior")) {
      const Eigen::Index r = header.at("prior").at("rank").get<Eigen::Index>();
      require(r >= 1 && r <= arch.dim, "checkpoint prior rank out of range");
      nn::GaussianPrior prior;
      prior.rest = header.at("prior").at("rest").get<double>();
      prior.mean.resize(arch.dim);
      prior.lambdas.resize(r);
      prior.basis.resize(arch.dim, r);
      read_block(prior.mean);
      read_block(prior.lambdas);
      Eigen::Map<Eigen::VectorXd> basis(prior.basis.data(), prior.basis.size());
      in.read(reinterpret_cast<char*>(basis.data()), static_cast<std::streamsize>(basis.size() * sizeof(double)));
      if (!in) fail(ErrorCode::io, "truncated checkpoint prior");
      net.set_prior(std::move(prior));
    }

    Model model{std::move(net), std::nullopt, {}};
    model.meta.dataset_hash = header.at("dataset_hash").get<std::string>();
    model.meta.seed = header.at("seed").get<std::uint64_t>();
    model.meta.condition = header.at("condition").get<std::string>();
    model.meta.extra = header.at("extra");
    for (const json& ch : header.at("channels"))
      model.meta.channels.push_back({ch.at("name").get<std::string>(), ch.at("rows").get<int>(), ch.at("cols").get<int>(),
                                     ch.at("mean").get<double>(), ch.at("std").get<double>()});
    if (header.contains("augmentation")) {
      const json& a = header.at("augmentation");
      nn::ConditionalAugmentation aug(model.base, a.at("condition_dim").get<int>(), 0, a.at("encoder_width").get<int>());
      if (a.at("parameters").get<Eigen::Index>() != aug.parameters().size())
        fail(ErrorCode::invalid_argument, "checkpoint augmentation size does not match its architecture");
      read_block(aug.parameters());
      model.augmented = std::move(aug);
    }
    if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::io, "trailing bytes in checkpoint");
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::io, std::string("malformed checkpoint header: ") + e.what());
  }
}

}  // namespace physgen::io
