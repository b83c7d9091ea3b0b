#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "diaf/krylov.hpp"
#include "diaf/patterns.hpp"
#include "diaf/sparse.hpp"

namespace diaf {

enum class Method { DiafQ, DiafS };
enum class VShape { BlockDiag, BlockUpper };
enum class StabilizeMode { Auto, On, Off };

/// One benchmark run. Defaults: k = 3,
/// tau_i = 0.1, p_i = 0, tau_l = 0, p_l = 0, BiCGSTAB to 1e-8 within 1000
/// iterations.
struct ExperimentConfig {
    std::string matrix;
    std::string name;  ///< defaults to the file stem
    Method method = Method::DiafQ;
    VShape v_shape = VShape::BlockDiag;
    Index max_block = 50;
    /// 0: V takes the structure of the block part of A. Otherwise V is
    /// selected from the full block shape, at most k_v entries per column.
    Index k_v = 0;
    NeumannConfig neumann;
    double stab_threshold = 1e-2;
    double stab_r = 2.0;
    StabilizeMode stabilize = StabilizeMode::Auto;
    double tol = 1e-8;
    Index maxit = 1000;

    void validate() const;
};

struct PhaseTimes {
    double read = 0;
    double preprocess = 0;
    double patterns = 0;
    double factor = 0;
    double factor_v = 0;
    double solve = 0;

    friend bool operator==(const PhaseTimes&, const PhaseTimes&) = default;
};

/// Metrics of one run. `status` is "converged", "no_convergence",
/// "breakdown" or "error"; on error `failed_stage` names the stage.
struct ResultRow {
    std::string problem;
    Index n = 0;
    Index nnz = 0;
    Index max_block = 0;  ///< largest diagonal block actually used
    Index n_blocks = 0;
    double rho = 0;
    double kappa_v = 0;
    double nrm = 0;
    Index its = 0;
    std::string status = "error";
    Index stab = 0;
    double true_residual = 0;
    double solution_error = 0;  ///< ||x - 1||_inf in original coordinates
    PhaseTimes times;
    std::string failed_stage;
    std::string message;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Runs the full pipeline on `cfg.matrix`.
ResultRow run_experiment(const ExperimentConfig& cfg);
/// Same pipeline on an in-memory matrix; `cfg.matrix` is ignored.
ResultRow run_experiment(const ExperimentConfig& cfg, const SparseMatrixd& A);

enum class ReportFormat { Csv, Json };

nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const ResultRow& row);
ResultRow result_row_from_json(const nlohmann::json& j);

void emit_report(const std::vector<ResultRow>& rows, ReportFormat format, std::ostream& out,
                 const std::vector<ExperimentConfig>& configs = {});
void emit_report(const std::vector<ResultRow>& rows, ReportFormat format, const std::string& path,
                 const std::vector<ExperimentConfig>& configs = {});

/// 0 converged, 2 no convergence, 3 breakdown, 1 pipeline error; the worst
/// over all rows.
int exit_code(const std::vector<ResultRow>& rows);

std::string to_string(Method m);
std::string to_string(VShape s);

}  // namespace diaf
