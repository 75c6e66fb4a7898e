#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nacert/errors.hpp"
#include "nacert/network.hpp"
#include "nacert/partitioner.hpp"
#include "nacert/systems.hpp"

namespace nacert {

// Encoder / linear latent map / decoder triple predicting x(t) = dec(K^t enc(x0)).
struct KoopmanModel {
  Network encoder;
  Network koopman;
  Network decoder;
  int horizon = 0;
  QuadraticParams params;

  // Chained network for step t; t = 0 is decoder(encoder(x)).
  Network step_network(int t) const {
    if (t < 0 || t > horizon) throw ConfigError("step " + std::to_string(t) + " outside [0, horizon]");
    std::vector<Network> parts{encoder};
    for (int k = 0; k < t; ++k) parts.push_back(koopman);
    parts.push_back(decoder);
    return chain(parts);
  }
};

// Reads model.json in `dir`, which names the three weight files.
inline KoopmanModel load_koopman(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const fs::path meta_path = root / "model.json";
  std::ifstream in(meta_path);
  if (!in) throw ParseError("cannot open '" + meta_path.string() + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + meta_path.string() + "': " + e.what());
  }
  KoopmanModel m;
  try {
    m.horizon = meta.at("horizon").get<int>();
    m.params.dt = meta.value("dt", m.params.dt);
    m.params.mu = meta.value("mu", m.params.mu);
    m.params.lambda = meta.value("lambda", m.params.lambda);
    m.encoder = load_weights((root / meta.value("encoder", "encoder.json")).string());
    m.koopman = load_weights((root / meta.value("koopman", "koopman.json")).string());
    m.decoder = load_weights((root / meta.value("decoder", "decoder.json")).string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + meta_path.string() + "': " + e.what());
  }
  if (m.horizon < 0) throw ParseError("'" + meta_path.string() + "': negative horizon");
  if (m.koopman.input_dim() != m.koopman.output_dim() || m.encoder.output_dim() != m.koopman.input_dim() ||
      m.decoder.input_dim() != m.koopman.output_dim())
    throw DimensionError("koopman parts do not compose");
  if (m.encoder.input_dim() != 2 || m.decoder.output_dim() != 2)
    throw DimensionError("koopman model must map 2 states to 2 states");
  return m;
}

struct KoopmanReport {
  std::vector<CoverageReport> steps;  // index = time step
  double certified_fraction = 0.0;    // fraction certified for every step and state
  std::size_t counterexamples = 0;
  double wall_time = 0.0;
};

// Verifies every (step, state) output of the trajectory against the closed
// form of the quadratic system.
inline KoopmanReport verify_koopman(const KoopmanModel& model, double epsilon, const PartitionConfig& config = {},
                                    int last_step = -1) {
  if (last_step < 0 || last_step > model.horizon) last_step = model.horizon;
  KoopmanReport out;
  std::vector<std::vector<Hyperrectangle>> bad;
  Hyperrectangle domain;
  for (int t = 0; t <= last_step; ++t) {
    const auto sys = quadratic_steps(t, model.params, epsilon);
    domain = sys.domain();
    auto rep = verify_domain(Reference::analytic(sys), model.step_network(t), domain, epsilon, config);
    for (std::size_t j = 0; j < rep.output_count; ++j) {
      std::vector<Hyperrectangle> g;
      for (const auto& r : rep.regions)
        if (r.j == j && r.status != RegionStatus::Certified) g.push_back(r.box);
      if (!g.empty()) bad.push_back(std::move(g));
    }
    out.counterexamples += rep.counterexamples.size();
    out.wall_time += rep.wall_time;
    out.steps.push_back(std::move(rep));
  }
  out.certified_fraction = std::clamp(1.0 - union_volume(bad) / domain.volume(), 0.0, 1.0);
  return out;
}

}  // namespace nacert
