#include "cbf_guard/trajectory_io.hpp"

#include "format.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace cbf_guard {

namespace {

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) out << ',' << detail::format_real(v[j]);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_real(const std::string& text, std::size_t line_no) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "line " + std::to_string(line_no) + ": '" + text + "' is not a number");
  }
  return v;
}

// Counts the columns named prefix1, prefix2, ... starting at `pos`.
Eigen::Index count_columns(const std::vector<std::string>& header, std::size_t& pos,
                           const std::string& prefix) {
  Eigen::Index count = 0;
  while (pos < header.size() && header[pos] == prefix + std::to_string(count + 1)) {
    ++count;
    ++pos;
  }
  return count;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, bool substep_rows) {
  if (substep_rows && traj.substep_states.size() != traj.substep_times.size()) {
    throw Error(ErrorKind::InvalidArgument, "substep rows need a trajectory with recorded substeps");
  }
  const Eigen::Index n = traj.final_state.size();
  const Eigen::Index m = traj.u_cert.empty() ? 0 : traj.u_cert.front().size();
  const std::size_t k_barriers = traj.h_values.size();

  out << 't';
  for (Eigen::Index j = 0; j < n; ++j) out << ",x" << (j + 1);
  for (Eigen::Index j = 0; j < m; ++j) out << ",u" << (j + 1);
  for (Eigen::Index j = 0; j < m; ++j) out << ",uc" << (j + 1);
  for (std::size_t i = 0; i < k_barriers; ++i) out << ",h" << (i + 1);
  out << ",inactive\n";

  auto write_row = [&](double t, const StateVector& x, std::size_t tick, std::size_t substep) {
    out << detail::format_real(t);
    write_vector(out, x);
    write_vector(out, traj.u_uncert[tick]);
    write_vector(out, traj.u_cert[tick]);
    for (std::size_t i = 0; i < k_barriers; ++i) {
      out << ',' << detail::format_real(traj.h_values[i][substep]);
    }
    out << ',' << (traj.inactive[tick] ? 1 : 0) << '\n';
  };

  if (traj.times.empty()) return;
  const std::size_t per_tick = traj.substeps_per_tick;
  if (!substep_rows) {
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      write_row(traj.times[k], traj.states[k], k, k * per_tick);
    }
    return;
  }
  for (std::size_t s = 0; s < traj.substep_times.size(); ++s) {
    // Substep s lies in tick (s - 1) / per_tick; the initial row in tick 0.
    const std::size_t tick = std::min(s == 0 ? 0 : (s - 1) / per_tick, traj.times.size() - 1);
    write_row(traj.substep_times[s], traj.substep_states[s], tick, s);
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidArgument, "trajectory CSV is empty");
  const std::vector<std::string> header = split(line);
  if (header.empty() || header.front() != "t") {
    throw Error(ErrorKind::InvalidArgument, "trajectory CSV must start with column 't'");
  }
  std::size_t pos = 1;
  const Eigen::Index n = count_columns(header, pos, "x");
  const Eigen::Index m = count_columns(header, pos, "u");
  const Eigen::Index mc = count_columns(header, pos, "uc");
  const Eigen::Index k_barriers = count_columns(header, pos, "h");
  if (n == 0 || m != mc || pos + 1 != header.size() || header[pos] != "inactive") {
    throw Error(ErrorKind::InvalidArgument,
                "trajectory CSV header must read t,x1..xn,u1..um,uc1..ucm,h1..hK,inactive");
  }

  Trajectory traj;
  traj.substeps_per_tick = 1;
  traj.h_values.assign(static_cast<std::size_t>(k_barriers), {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(line_no) + ": expected " +
                                                  std::to_string(header.size()) + " fields");
    }
    std::size_t f = 0;
    const double t = parse_real(fields[f++], line_no);
    auto read_vector = [&](Eigen::Index size) {
      Eigen::VectorXd v(size);
      for (Eigen::Index j = 0; j < size; ++j) v[j] = parse_real(fields[f++], line_no);
      return v;
    };
    traj.times.push_back(t);
    traj.substep_times.push_back(t);
    traj.states.push_back(read_vector(n));
    traj.u_uncert.push_back(read_vector(m));
    traj.u_cert.push_back(read_vector(m));
    for (auto& hv : traj.h_values) hv.push_back(parse_real(fields[f++], line_no));
    const std::string& flag = fields[f];
    if (flag != "0" && flag != "1") {
      throw Error(ErrorKind::InvalidArgument,
                  "line " + std::to_string(line_no) + ": inactive must be 0 or 1");
    }
    traj.inactive.push_back(flag == "1");
  }
  if (traj.times.empty()) throw Error(ErrorKind::InvalidArgument, "trajectory CSV has no rows");
  traj.substep_states = traj.states;
  traj.final_state = traj.states.back();
  return traj;
}

}  // namespace cbf_guard
