#include "env/env.hpp"

namespace m2i2::env {

EnvKind parse_env_kind(const std::string& name) {
  if (name == "hallway") return EnvKind::hallway;
  if (name == "hallwaygroup") return EnvKind::hallwaygroup;
  if (name == "predator_prey" || name == "pp") return EnvKind::predator_prey;
  throw InvalidConfig("unknown environment kind: " + name);
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::hallway: return "hallway";
    case EnvKind::hallwaygroup: return "hallwaygroup";
    case EnvKind::predator_prey: return "predator_prey";
  }
  return "unknown";
}

std::unique_ptr<Env> make_env(const EnvConfig& config) {
  switch (config.kind) {
    case EnvKind::hallway: return std::make_unique<Hallway>(config.hallway, false);
    case EnvKind::hallwaygroup: return std::make_unique<Hallway>(config.hallway, true);
    case EnvKind::predator_prey: return std::make_unique<PredatorPrey>(config.predator_prey);
  }
  throw InvalidConfig("unknown environment kind");
}

}  // namespace m2i2::env
