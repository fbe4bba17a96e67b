#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autores/model.hpp"

namespace autores {

struct TrajectoryMeta {
  std::string integrator;
  double step_or_tol = 0.0;
  std::optional<std::uint64_t> seed;  // empty for deterministic runs
  std::uint64_t path_index = 0;
  bool truncated = false;
  double truncated_at = 0.0;  // first time a non-finite state appeared
};

/// Time samples with matching 2-component states. Column names say what the
/// components are ("r", "psi"), ("R", "Psi") or ("u", "v").
struct Trajectory {
  std::string time_label = "tau";
  std::string labels[2] = {"r", "psi"};
  std::vector<double> times;
  std::vector<Vec2> states;
  TrajectoryMeta meta;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  [[nodiscard]] bool empty() const noexcept { return times.empty(); }
  [[nodiscard]] double back_time() const { return times.back(); }
  [[nodiscard]] const Vec2& back_state() const { return states.back(); }

  void push(double t, const Vec2& x) {
    times.push_back(t);
    states.push_back(x);
  }
};

}  // namespace autores
