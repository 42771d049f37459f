#include "epi/csv.hpp"

#include <cstdio>
#include <fstream>

#include "epi/errors.hpp"

namespace epi {

namespace {

void append_row(std::string& out, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += format_number(row[i]);
  }
  out += '\n';
}

std::string header_line(const std::string& digest) { return "# digest: " + digest + "\n"; }

double at(const Curve& c, std::size_t k) { return c.size() > k ? c[k] : 0.0; }

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string curves_csv(const TimeMesh& mesh, const std::vector<std::string>& names,
                       const std::vector<const Curve*>& columns, const std::string& digest) {
  std::string out = header_line(digest);
  out += "t";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    std::vector<double> row{mesh.time(k)};
    for (const Curve* c : columns) row.push_back(at(*c, k));
    append_row(out, row);
  }
  return out;
}

std::string trajectory_csv(const Trajectory& traj, const std::string& digest) {
  std::string out = header_line(digest);
  out += "t,S,E,I,R,F,A";
  for (std::size_t p = 0; p < traj.Sp.size(); ++p) {
    std::string i = std::to_string(p);
    out += ",S_p" + i + ",I_p" + i + ",R_p" + i;
  }
  out += '\n';
  for (std::size_t k = 0; k < traj.mesh.size(); ++k) {
    std::vector<double> row{traj.mesh.time(k),
                            static_cast<double>(traj.S.size() > k ? traj.S[k] : 0),
                            static_cast<double>(traj.E.size() > k ? traj.E[k] : 0),
                            static_cast<double>(traj.I.size() > k ? traj.I[k] : 0),
                            static_cast<double>(traj.R.size() > k ? traj.R[k] : 0),
                            at(traj.force, k),
                            static_cast<double>(traj.A.size() > k ? traj.A[k] : 0)};
    for (std::size_t p = 0; p < traj.Sp.size(); ++p) {
      row.push_back(static_cast<double>(traj.Sp[p][k]));
      row.push_back(static_cast<double>(traj.Ip[p][k]));
      row.push_back(static_cast<double>(traj.Rp[p][k]));
    }
    append_row(out, row);
  }
  return out;
}

std::string limit_csv(const LimitSolution& sol, const std::string& digest) {
  std::string out = header_line(digest);
  out += "t,S,E,I,R,F,A";
  for (std::size_t p = 0; p < sol.Sp.size(); ++p) {
    std::string i = std::to_string(p);
    out += ",S_p" + i + ",I_p" + i + ",R_p" + i;
  }
  out += '\n';
  for (std::size_t k = 0; k < sol.mesh.size(); ++k) {
    double s = at(sol.S, k);
    // cumulative infections of the limit: everyone who left S
    double a = sol.S.empty() ? 0.0 : sol.S[0] - s;
    std::vector<double> row{sol.mesh.time(k), s,
                            at(sol.E, k), at(sol.I, k), at(sol.R, k),
                            at(sol.force, k), a};
    for (std::size_t p = 0; p < sol.Sp.size(); ++p) {
      row.push_back(at(sol.Sp[p], k));
      row.push_back(at(sol.Ip[p], k));
      row.push_back(at(sol.Rp[p], k));
    }
    append_row(out, row);
  }
  return out;
}

std::string ensemble_csv(const EnsembleStats& st, const std::string& digest) {
  return curves_csv(
      st.mesh,
      {"mean_S", "var_S", "mean_E", "var_E", "mean_I", "var_I", "mean_R", "var_R", "mean_F",
       "var_F", "mean_A", "var_A"},
      {&st.meanS, &st.varS, &st.meanE, &st.varE, &st.meanI, &st.varI, &st.meanR, &st.varR,
       &st.meanForce, &st.varForce, &st.meanA, &st.varA},
      digest);
}

std::string age_field_csv(const AgeDensityField& field, const std::string& digest) {
  std::string out = header_line(digest);
  out += "t,x,i\n";
  for (std::size_t k = 0; k < field.mesh.size(); ++k)
    for (std::size_t j = 0; j < field.ageCount(); ++j)
      append_row(out, {field.mesh.time(k), field.age(j), field.value(k, j)});
  return out;
}

std::string age_trace_csv(const AgeDensityField& field, const std::string& digest) {
  return curves_csv(field.mesh, {"boundary", "S", "I"},
                    {&field.boundary, &field.susceptible, &field.mass}, digest);
}

std::string fluctuation_variance_csv(const FluctuationEnsemble& ens, const std::string& digest) {
  std::vector<std::string> names;
  std::vector<const Curve*> cols;
  for (std::size_t c = 0; c < ens.components.size(); ++c) {
    names.push_back("var_" + ens.components[c]);
    cols.push_back(&ens.variance[c]);
  }
  return curves_csv(ens.mesh, names, cols, digest);
}

std::string driver_block_csv(const GaussianDriverSpec& spec, std::size_t block,
                             const std::string& digest) {
  if (block >= spec.blocks.size()) throw ValidationError("driver_block_csv: block out of range");
  const auto& members = spec.blocks[block];
  const Matrix& cov = spec.blockCov[block];
  std::size_t n = spec.mesh.size();
  std::string out = header_line(digest);
  auto label = [&](std::size_t flat) {
    std::size_t d = flat / n, k = flat % n;
    return spec.names[members[d]] + "@" + format_number(spec.mesh.time(k));
  };
  out += "row";
  for (std::size_t j = 0; j < cov.cols; ++j) out += "," + label(j);
  out += '\n';
  for (std::size_t i = 0; i < cov.rows; ++i) {
    out += label(i);
    for (std::size_t j = 0; j < cov.cols; ++j) out += "," + format_number(cov.a[i * cov.cols + j]);
    out += '\n';
  }
  return out;
}

std::string csv_digest(const std::string& text) {
  const std::string prefix = "# digest: ";
  if (text.compare(0, prefix.size(), prefix) != 0) return "";
  auto end = text.find('\n');
  return text.substr(prefix.size(), end - prefix.size());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

}  // namespace epi
