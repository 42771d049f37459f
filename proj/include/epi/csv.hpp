#pragma once
#include <string>
#include <utility>
#include <vector>

#include "epi/abm.hpp"
#include "epi/age_pde.hpp"
#include "epi/fclt.hpp"
#include "epi/mesh.hpp"
#include "epi/volterra.hpp"

namespace epi {

// All writers emit a fixed-format body (printf %.12g) so that identical data
// serializes to identical bytes, preceded by a comment header carrying the
// scenario digest:  "# digest: <hex>".

std::string format_number(double v);

// Generic curve table: columns t, <names...>.
std::string curves_csv(const TimeMesh& mesh, const std::vector<std::string>& names,
                       const std::vector<const Curve*>& columns, const std::string& digest);

// Sampled-path table: t, S, E, I, R, F, A (+ S_p<i>, I_p<i>, R_p<i> per patch).
std::string trajectory_csv(const Trajectory& traj, const std::string& digest);

// Deterministic limit, same layout (absent compartments as 0).
std::string limit_csv(const LimitSolution& sol, const std::string& digest);

// Ensemble mean/variance per compartment: t, then mean_<X>, var_<X> columns.
std::string ensemble_csv(const EnsembleStats& st, const std::string& digest);

// Age-density field in long form: t, x, i.
std::string age_field_csv(const AgeDensityField& field, const std::string& digest);
// Boundary trace and aggregates of the field: t, boundary, S, I.
std::string age_trace_csv(const AgeDensityField& field, const std::string& digest);

// Variance curves of a fluctuation ensemble: t, var_<component>...
std::string fluctuation_variance_csv(const FluctuationEnsemble& ens, const std::string& digest);
// One covariance block: header row/column labels are <driver>@<t>.
std::string driver_block_csv(const GaussianDriverSpec& spec, std::size_t block,
                             const std::string& digest);

// Read the digest comment back from a serialized table.
std::string csv_digest(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace epi
