#include "bitemp/phantom.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bitemp/rng.hpp"

namespace bitemp::phantom {

RegionClass region_class_from_name(const std::string& name) {
  if (name == "CLB") return RegionClass::Clb;
  if (name == "NHB") return RegionClass::Nhb;
  if (name == "p") return RegionClass::Penumbra;
  if (name == "c") return RegionClass::Core;
  if (name == "fi-overlay") return RegionClass::FiOverlay;
  throw Error(ErrorCode::ConfigError, "unknown region class '" + name + "'");
}

const char* region_class_name(RegionClass c) {
  switch (c) {
    case RegionClass::Clb: return "CLB";
    case RegionClass::Nhb: return "NHB";
    case RegionClass::Penumbra: return "p";
    case RegionClass::Core: return "c";
    case RegionClass::FiOverlay: return "fi-overlay";
  }
  return "?";
}

void PhantomConfig::validate() const {
  if (nx < 1 || ny < 1 || nz < 1 || nt < 1) {
    throw Error(ErrorCode::ConfigError, "phantom dims must all be >= 1");
  }
  if (!(sx > 0) || !(sy > 0) || !(sz > 0)) {
    throw Error(ErrorCode::ConfigError, "phantom spacing must be positive");
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& r = regions[i];
    if (!(r.radius > 0)) {
      throw Error(ErrorCode::ConfigError,
                  "region " + std::to_string(i) + ": radius must be > 0");
    }
    if (r.tac.noise_sd < 0) {
      throw Error(ErrorCode::ConfigError,
                  "region " + std::to_string(i) + ": noise_sd must be >= 0");
    }
    if (!(r.tac.width > 0)) {
      throw Error(ErrorCode::ConfigError,
                  "region " + std::to_string(i) + ": width must be > 0");
    }
    if (r.cx - r.radius < 0 || r.cx + r.radius > nx - 1 ||
        r.cy - r.radius < 0 || r.cy + r.radius > ny - 1 ||
        r.cz - r.radius < 0 || r.cz + r.radius > nz - 1) {
      throw Error(ErrorCode::ConfigError,
                  "region " + std::to_string(i) + " does not fit within dims");
    }
  }
}

namespace {

TacParams parse_tac(const nlohmann::json& j) {
  TacParams tac;
  tac.baseline = j.at("baseline").get<double>();
  tac.peak = j.at("peak").get<double>();
  tac.time_to_peak = j.at("time_to_peak").get<double>();
  tac.width = j.at("width").get<double>();
  tac.noise_sd = j.value("noise_sd", 0.0);
  return tac;
}

}  // namespace

PhantomConfig parse_phantom_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError,
                std::string("malformed phantom config JSON: ") + e.what());
  }

  PhantomConfig cfg;
  try {
    const auto& dims = j.at("dims");
    cfg.nx = dims.at(0).get<int>();
    cfg.ny = dims.at(1).get<int>();
    cfg.nz = dims.at(2).get<int>();
    cfg.nt = dims.at(3).get<int>();
    if (j.contains("spacing")) {
      cfg.sx = j["spacing"].at(0).get<double>();
      cfg.sy = j["spacing"].at(1).get<double>();
      cfg.sz = j["spacing"].at(2).get<double>();
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    for (const auto& rj : j.at("regions")) {
      Region r;
      r.cls = region_class_from_name(rj.at("class").get<std::string>());
      r.cx = rj.at("center").at(0).get<double>();
      r.cy = rj.at("center").at(1).get<double>();
      r.cz = rj.at("center").at(2).get<double>();
      r.radius = rj.at("radius").get<double>();
      if (r.cls != RegionClass::FiOverlay) {
        r.tac = parse_tac(rj.at("tac"));
      }
      cfg.regions.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError,
                std::string("phantom config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PhantomConfig load_phantom_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_phantom_config(buf.str());
}

double tac_value(const TacParams& tac, double t) {
  const double d = (t - tac.time_to_peak) / tac.width;
  return tac.baseline + (tac.peak - tac.baseline) * std::exp(-0.5 * d * d);
}

namespace {

inline bool inside(const Region& r, int x, int y, int z) {
  const double dx = x - r.cx, dy = y - r.cy, dz = z - r.cz;
  return dx * dx + dy * dy + dz * dz <= r.radius * r.radius;
}

// Precedence when radii tie: core > penumbra > CLB > NHB.
int class_precedence(RegionClass c) {
  switch (c) {
    case RegionClass::Core: return 0;
    case RegionClass::Penumbra: return 1;
    case RegionClass::Clb: return 2;
    case RegionClass::Nhb: return 3;
    default: return 4;
  }
}

std::uint8_t t1_code(RegionClass c) {
  switch (c) {
    case RegionClass::Clb: return kT1Clb;
    case RegionClass::Nhb: return kT1Nhb;
    case RegionClass::Penumbra: return kT1Penumbra;
    case RegionClass::Core: return kT1Core;
    default: return 0;
  }
}

}  // namespace

PhantomOutput generate_phantom(const PhantomConfig& config) {
  config.validate();

  PhantomOutput out;
  out.volume = Volume4D(config.nx, config.ny, config.nz, config.nt,
                        config.sx, config.sy, config.sz);
  out.t1_mask = LabelMask(config.nx, config.ny, config.nz);
  out.t1_mask.legend = t1_mask_legend();
  out.t2_mask = LabelMask(config.nx, config.ny, config.nz);
  out.t2_mask.legend = t2_mask_legend();

  std::vector<const Region*> tissue;
  std::vector<const Region*> overlays;
  for (const Region& r : config.regions) {
    (r.cls == RegionClass::FiOverlay ? overlays : tissue).push_back(&r);
  }

  for (int z = 0; z < config.nz; ++z) {
    for (int y = 0; y < config.ny; ++y) {
      for (int x = 0; x < config.nx; ++x) {
        // Innermost (smallest radius) containing region wins, mirroring the
        // core-inside-penumbra-inside-brain nesting.
        const Region* winner = nullptr;
        for (const Region* r : tissue) {
          if (!inside(*r, x, y, z)) continue;
          if (!winner || r->radius < winner->radius ||
              (r->radius == winner->radius &&
               class_precedence(r->cls) < class_precedence(winner->cls))) {
            winner = r;
          }
        }
        if (winner) {
          for (const Region* r : tissue) {
            if (r == winner || r->cls != winner->cls) continue;
            if (inside(*r, x, y, z) && !(r->tac == winner->tac)) {
              throw Error(ErrorCode::ConfigConflict,
                          "overlapping '" +
                              std::string(region_class_name(r->cls)) +
                              "' regions with conflicting tac_params at voxel (" +
                              std::to_string(x) + "," + std::to_string(y) +
                              "," + std::to_string(z) + ")");
            }
          }
        }

        const std::size_t voxel = out.t1_mask.index(x, y, z);
        if (winner) {
          out.t1_mask.labels[voxel] = t1_code(winner->cls);
          const TacParams& tac = winner->tac;
          for (int t = 0; t < config.nt; ++t) {
            double v = tac_value(tac, t);
            if (tac.noise_sd > 0) {
              v += tac.noise_sd *
                   rng::counter_gauss(config.seed,
                                      voxel * static_cast<std::uint64_t>(
                                                  config.nt) +
                                          t);
            }
            out.volume.at(x, y, z, t) = static_cast<float>(v);
          }
        }

        bool in_fi = false;
        for (const Region* r : overlays) {
          if (inside(*r, x, y, z)) {
            in_fi = true;
            break;
          }
        }
        if (in_fi) {
          out.t2_mask.labels[voxel] = kT2Infarct;
        } else if (winner) {
          out.t2_mask.labels[voxel] = kT2Brain;
        }
      }
    }
  }
  return out;
}

}  // namespace bitemp::phantom
