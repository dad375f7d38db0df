#pragma once

#include "cqed/config.hpp"

namespace testing {

inline cqed::RunConfig preset(const std::string& name) {
  return cqed::resolve_config(nlohmann::json::object(), cqed::CliOverrides{name, {}, {}, {}, {}});
}

/// Preset parameters at the trap (or probe) drive with the default cutoff filled in.
inline cqed::SystemParams params(const std::string& name, bool trap = true) {
  const cqed::RunConfig c = preset(name);
  cqed::SystemParams p = c.sim.params;
  const auto& tr = c.sim.trigger;
  p.drive = cqed::drive_for_target(p, trap ? tr.trap_level : tr.probe_level, tr.observable);
  p.fock_cutoff = cqed::default_fock_cutoff(p);
  return p;
}

}  // namespace testing
