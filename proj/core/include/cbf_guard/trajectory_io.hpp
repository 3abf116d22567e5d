#pragma once

#include "cbf_guard/sim.hpp"

#include <iosfwd>

namespace cbf_guard {

/// CSV with header t,x1..xn,u1..um,uc1..ucm,h1..hK,inactive.
///
/// By default one row per control tick. With `substep_rows` every logged
/// integration substep gets a row, carrying the inputs held over it; this
/// needs a trajectory simulated with record_substeps.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, bool substep_rows = false);

/// Reads a CSV written by write_trajectory_csv. Each row becomes one tick
/// whose barrier values are also its single logged substep, so
/// compute_metrics sees exactly the rows in the file.
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace cbf_guard
