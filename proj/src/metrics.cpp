#include <cmath>
#include <numbers>
#include <ostream>

#include "spine/csv.hpp"
#include "spine/errors.hpp"
#include "spine/mpc.hpp"

namespace spine::mpc {

namespace {

constexpr double kCm = 100.0;
constexpr double kDeg = 180.0 / std::numbers::pi;

struct CoordInfo {
  std::string name;
  bool angle;
};

std::vector<CoordInfo> pose_coords(const SpineModel& model, int body) {
  static const char* names2[] = {"x", "z", "gamma"};
  static const char* names3[] = {"x", "y", "z", "theta", "gamma", "psi"};
  std::vector<CoordInfo> out;
  for (int a = 0; a < model.pose_dim(); ++a) {
    const std::string base = model.dim == 2 ? names2[a] : names3[a];
    out.push_back({base + std::to_string(body + 1), a >= model.dim});
  }
  return out;
}

void accumulate(ErrorMetrics::Coordinate& c, double e, bool last) {
  c.max = std::max(c.max, e);
  c.mean += e;
  if (last) c.final = e;
}

}  // namespace

double ErrorMetrics::max_com_error_cm() const {
  double m = 0.0;
  for (const auto& c : com) m = std::max(m, c.max);
  return m;
}

double ErrorMetrics::final_com_error_cm() const {
  double m = 0.0;
  for (const auto& c : com) m = std::max(m, c.final);
  return m;
}

ErrorMetrics error_metrics(const SpineModel& model, const ControllerTrace& trace,
                           double discard_fraction) {
  if (trace.size() == 0) throw InvalidInputError("error_metrics: empty trace");
  if (!(discard_fraction >= 0.0 && discard_fraction < 1.0)) {
    throw InvalidInputError("discard fraction must lie in [0, 1)");
  }
  const auto first = static_cast<std::size_t>(
      std::floor(discard_fraction * static_cast<double>(trace.size())));
  ErrorMetrics m;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    for (const auto& info : pose_coords(model, j)) {
      m.coordinates.push_back({info.name, info.angle ? "deg" : "cm"});
    }
    m.com.push_back({"com" + std::to_string(j + 1), "cm"});
  }
  for (std::size_t k = first; k < trace.size(); ++k) {
    const bool last = k + 1 == trace.size();
    const VectorXd err = trace.xi[k] - trace.xi_ref[k];
    std::size_t c = 0;
    for (int j = 0; j < model.moving_bodies(); ++j) {
      const Index p = model.pose_offset(j);
      for (int a = 0; a < model.pose_dim(); ++a, ++c) {
        const double scale = a >= model.dim ? kDeg : kCm;
        accumulate(m.coordinates[c], std::abs(err(p + a)) * scale, last);
      }
      accumulate(m.com[static_cast<std::size_t>(j)], err.segment(p, model.dim).norm() * kCm, last);
    }
  }
  m.samples_used = trace.size() - first;
  for (auto* group : {&m.coordinates, &m.com}) {
    for (auto& c : *group) c.mean /= static_cast<double>(m.samples_used);
  }
  return m;
}

void write_com_path_csv(std::ostream& out, const SpineModel& model, const ControllerTrace& trace) {
  std::vector<std::string> header{"t"};
  const std::string axes[] = {"x", "z", "x_ref", "z_ref"};
  for (int j = 0; j < model.moving_bodies(); ++j) {
    for (const auto& a : axes) header.push_back(a + std::to_string(j + 1) + "_cm");
  }
  csv::write_header(out, header);
  csv::RowWriter row(out);
  const int zi = model.vertical_axis();
  for (std::size_t k = 0; k < trace.size(); ++k) {
    row.add(trace.t[k]);
    for (int j = 0; j < model.moving_bodies(); ++j) {
      const Index p = model.pose_offset(j);
      row.add(trace.xi[k](p) * kCm).add(trace.xi[k](p + zi) * kCm);
      row.add(trace.xi_ref[k](p) * kCm).add(trace.xi_ref[k](p + zi) * kCm);
    }
    row.end();
  }
}

void write_error_csv(std::ostream& out, const SpineModel& model, const ControllerTrace& trace) {
  std::vector<std::string> header{"t"};
  for (int j = 0; j < model.moving_bodies(); ++j) {
    for (const auto& info : pose_coords(model, j)) {
      header.push_back("err_" + info.name + (info.angle ? "_deg" : "_cm"));
    }
  }
  csv::write_header(out, header);
  csv::RowWriter row(out);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    row.add(trace.t[k]);
    const VectorXd err = trace.xi[k] - trace.xi_ref[k];
    for (int j = 0; j < model.moving_bodies(); ++j) {
      const Index p = model.pose_offset(j);
      for (int a = 0; a < model.pose_dim(); ++a) {
        row.add(err(p + a) * (a >= model.dim ? kDeg : kCm));
      }
    }
    row.end();
  }
}

}  // namespace spine::mpc
