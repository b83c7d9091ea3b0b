#include "diaf/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "diaf/error.hpp"
#include "diaf/factor.hpp"
#include "diaf/preprocess.hpp"

namespace diaf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

BlockShape block_shape(VShape s)
{
    return s == VShape::BlockUpper ? BlockShape::BlockUpper : BlockShape::BlockDiagonal;
}

std::string file_stem(const std::string& path)
{
    return std::filesystem::path(path).stem().string();
}

// JSON has no inf or nan.
nlohmann::json number(double x)
{
    if (std::isfinite(x)) return x;
    return nullptr;
}

double number_from(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.at(key).get<double>();
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_number(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

}  // namespace

std::string to_string(Method m)
{
    return m == Method::DiafQ ? "diaf-q" : "diaf-s";
}

std::string to_string(VShape s)
{
    return s == VShape::BlockUpper ? "block-upper" : "block-diag";
}

void ExperimentConfig::validate() const
{
    if (max_block < 1) throw std::invalid_argument("max_block must be >= 1");
    if (k_v < 0) throw std::invalid_argument("k_v must be >= 0");
    if (neumann.k < 0) throw std::invalid_argument("neumann k must be >= 0");
    neumann.initial_drop.validate();
    neumann.level_drop.validate();
    if (!(stab_threshold >= 0.0)) throw std::invalid_argument("stab_threshold must be >= 0");
    if (!(stab_r > 0.0)) throw std::invalid_argument("stab_r must be > 0");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (maxit < 1) throw std::invalid_argument("maxit must be >= 1");
}

ResultRow run_experiment(const ExperimentConfig& cfg)
{
    ResultRow row;
    row.problem = cfg.name.empty() ? file_stem(cfg.matrix) : cfg.name;
    SparseMatrixd A;
    const auto t0 = Clock::now();
    try {
        A = read_matrix_market(cfg.matrix);
    } catch (const std::exception& e) {
        row.failed_stage = "read";
        row.message = e.what();
        return row;
    }
    const double t_read = seconds_since(t0);
    ExperimentConfig named = cfg;
    named.name = row.problem;
    row = run_experiment(named, A);
    row.times.read = t_read;
    return row;
}

ResultRow run_experiment(const ExperimentConfig& cfg, const SparseMatrixd& A0)
{
    ResultRow row;
    row.problem = cfg.name;
    row.n = A0.cols();
    row.nnz = A0.nonZeros();
    std::string stage = "config";
    try {
        cfg.validate();
        if (A0.rows() != A0.cols()) throw std::invalid_argument("matrix must be square");

        stage = "preprocess";
        auto t = Clock::now();
        const Permutation q = max_transversal(A0);
        const SparseMatrixd A1 = permute(A0, {}, std::span<const Index>(q.forward()));
        const Scaling s = equilibrate(A1);
        const SparseMatrixd A2 = scale(A1, std::span<const double>(s.row_scale),
                                       std::span<const double>(s.col_scale));
        const auto [pi, B] = scc_block_structure(A2, cfg.max_block);
        const SparseMatrixd A = permute(A2, std::span<const Index>(pi.forward()),
                                        std::span<const Index>(pi.forward()));
        row.times.preprocess = seconds_since(t);
        row.max_block = B.max_block();
        row.n_blocks = B.n_blocks();

        stage = "patterns";
        t = Clock::now();
        const BlockShape shape = block_shape(cfg.v_shape);
        const SubspacePattern V0 = restrict_to_shape(SubspacePattern::from_matrix(A, true), B, shape);
        SubspacePattern Wp = neumann_pattern(A, V0, cfg.neumann);
        SubspacePattern Vp = V0;
        if (cfg.k_v > 0) {
            Wp = remove_shape_offdiag(Wp, B, shape);
            const SubspacePattern cand = restrict_to_shape(product_pattern(A, Wp), B, shape);
            Vp = select_v_pattern(A, Wp, cand, cfg.k_v);
        }
        row.times.patterns = seconds_since(t);

        stage = "factor";
        t = Clock::now();
        FactorPair F;
        if (cfg.method == Method::DiafQ) {
            StabilizationPolicy policy;
            policy.threshold = cfg.stab_threshold;
            policy.r = cfg.stab_r;
            policy.enabled = cfg.stabilize == StabilizeMode::On ||
                             (cfg.stabilize == StabilizeMode::Auto && cfg.v_shape == VShape::BlockUpper);
            F = diaf_q(A, Wp, Vp, policy);
        } else {
            F = diaf_s(A, Wp, Vp);
        }
        row.times.factor = seconds_since(t);
        row.nrm = F.nrm;
        row.stab = F.stab_count;

        stage = "factor_v";
        t = Clock::now();
        const VFactorization VF = factor_v(F.V, B, shape);
        row.rho = static_cast<double>(static_cast<std::size_t>(F.W.nonZeros()) + VF.factor_nonzeros()) /
                  static_cast<double>(A0.nonZeros());
        row.kappa_v = cond_estimate(VF);
        row.times.factor_v = seconds_since(t);

        stage = "solve";
        t = Clock::now();
        const Vector<double> ones = Vector<double>::Ones(row.n);
        const Vector<double> b0 = spmv(A0, ones);
        Vector<double> b1 = b0;
        for (Index i = 0; i < row.n; ++i) b1(i) *= s.row_scale[i];
        const Vector<double> b = pi.gather(b1);
        Vector<double> y = Vector<double>::Zero(row.n);
        BicgstabOptions opts;
        opts.tol = cfg.tol;
        opts.maxit = cfg.maxit;
        const SparseMatrixd& W = F.W;
        const auto rep = bicgstab(
            A, b, y, [&](const Vector<double>& x) { return apply_right_precond(W, VF, x); }, opts);
        row.times.solve = seconds_since(t);
        row.its = rep.iterations;
        row.status = to_string(rep.status);
        row.true_residual = rep.true_residual;

        // Back to the original unknowns: y = pi-gathered (D_c^{-1} q-gathered x).
        Vector<double> z = pi.scatter(y);
        for (Index i = 0; i < row.n; ++i) z(i) *= s.col_scale[i];
        const Vector<double> x = q.scatter(z);
        row.solution_error = (x - ones).cwiseAbs().maxCoeff();
    } catch (const std::exception& e) {
        row.status = "error";
        row.failed_stage = stage;
        row.message = e.what();
    }
    return row;
}

nlohmann::json to_json(const ExperimentConfig& cfg)
{
    const char* stab = cfg.stabilize == StabilizeMode::On    ? "on"
                       : cfg.stabilize == StabilizeMode::Off ? "off"
                                                              : "auto";
    return {
        {"matrix", cfg.matrix},
        {"name", cfg.name},
        {"method", to_string(cfg.method)},
        {"v_shape", to_string(cfg.v_shape)},
        {"max_block", cfg.max_block},
        {"k_v", cfg.k_v},
        {"neumann_k", cfg.neumann.k},
        {"tau_i", cfg.neumann.initial_drop.tau},
        {"p_i", cfg.neumann.initial_drop.p},
        {"tau_l", cfg.neumann.level_drop.tau},
        {"p_l", cfg.neumann.level_drop.p},
        {"stab_threshold", cfg.stab_threshold},
        {"stab_r", cfg.stab_r},
        {"stabilize", stab},
        {"tol", cfg.tol},
        {"maxit", cfg.maxit},
    };
}

nlohmann::json to_json(const ResultRow& r)
{
    return {
        {"problem", r.problem},
        {"n", r.n},
        {"nnz", r.nnz},
        {"max_block", r.max_block},
        {"n_blocks", r.n_blocks},
        {"rho", number(r.rho)},
        {"kappa_v", number(r.kappa_v)},
        {"nrm", number(r.nrm)},
        {"its", r.its},
        {"status", r.status},
        {"stab", r.stab},
        {"true_residual", number(r.true_residual)},
        {"solution_error", number(r.solution_error)},
        {"times",
         {{"read", r.times.read},
          {"preprocess", r.times.preprocess},
          {"patterns", r.times.patterns},
          {"factor", r.times.factor},
          {"factor_v", r.times.factor_v},
          {"solve", r.times.solve}}},
        {"failed_stage", r.failed_stage},
        {"message", r.message},
    };
}

ResultRow result_row_from_json(const nlohmann::json& j)
{
    ResultRow r;
    r.problem = j.at("problem").get<std::string>();
    r.n = j.at("n").get<Index>();
    r.nnz = j.at("nnz").get<Index>();
    r.max_block = j.at("max_block").get<Index>();
    r.n_blocks = j.at("n_blocks").get<Index>();
    r.rho = number_from(j, "rho");
    r.kappa_v = number_from(j, "kappa_v");
    r.nrm = number_from(j, "nrm");
    r.its = j.at("its").get<Index>();
    r.status = j.at("status").get<std::string>();
    r.stab = j.at("stab").get<Index>();
    r.true_residual = number_from(j, "true_residual");
    r.solution_error = number_from(j, "solution_error");
    const auto& t = j.at("times");
    r.times.read = t.at("read").get<double>();
    r.times.preprocess = t.at("preprocess").get<double>();
    r.times.patterns = t.at("patterns").get<double>();
    r.times.factor = t.at("factor").get<double>();
    r.times.factor_v = t.at("factor_v").get<double>();
    r.times.solve = t.at("solve").get<double>();
    r.failed_stage = j.value("failed_stage", "");
    r.message = j.value("message", "");
    return r;
}

void emit_report(const std::vector<ResultRow>& rows, ReportFormat format, std::ostream& out,
                 const std::vector<ExperimentConfig>& configs)
{
    if (format == ReportFormat::Json) {
        nlohmann::json doc;
        doc["configs"] = nlohmann::json::array();
        for (const auto& c : configs) doc["configs"].push_back(to_json(c));
        doc["results"] = nlohmann::json::array();
        for (const auto& r : rows) doc["results"].push_back(to_json(r));
        out << doc.dump(2) << '\n';
        return;
    }
    out << "problem,n,nnz,max_block,n_blocks,rho,kappa_v,nrm,its,status,stab,true_residual,"
           "solution_error,t_read,t_preprocess,t_patterns,t_factor,t_factor_v,t_solve,failed_stage,"
           "message\n";
    for (const auto& r : rows) {
        out << csv_field(r.problem) << ',' << r.n << ',' << r.nnz << ',' << r.max_block << ','
            << r.n_blocks << ',' << csv_number(r.rho) << ',' << csv_number(r.kappa_v) << ','
            << csv_number(r.nrm) << ',' << r.its << ',' << r.status << ',' << r.stab << ','
            << csv_number(r.true_residual) << ',' << csv_number(r.solution_error) << ','
            << csv_number(r.times.read) << ',' << csv_number(r.times.preprocess) << ','
            << csv_number(r.times.patterns) << ',' << csv_number(r.times.factor) << ','
            << csv_number(r.times.factor_v) << ',' << csv_number(r.times.solve) << ','
            << csv_field(r.failed_stage) << ',' << csv_field(r.message) << '\n';
    }
}

void emit_report(const std::vector<ResultRow>& rows, ReportFormat format, const std::string& path,
                 const std::vector<ExperimentConfig>& configs)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    emit_report(rows, format, out, configs);
}

int exit_code(const std::vector<ResultRow>& rows)
{
    int code = 0;
    auto rank = [](int c) { return c == 1 ? 3 : c == 3 ? 2 : c == 2 ? 1 : 0; };
    for (const auto& r : rows) {
        int c = 0;
        if (r.status == "converged") c = 0;
        else if (r.status == "no_convergence") c = 2;
        else if (r.status == "breakdown") c = 3;
        else c = 1;
        if (rank(c) > rank(code)) code = c;
    }
    return code;
}

}  // namespace diaf
