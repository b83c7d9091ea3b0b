#include "diaf/sparse.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "diaf/error.hpp"

namespace diaf {

SubspacePattern::SubspacePattern(Index n, std::vector<std::vector<Index>> cols)
    : n_(n), cols_(std::move(cols))
{
    if (static_cast<Index>(cols_.size()) != n_) {
        throw std::invalid_argument("SubspacePattern: expected one index set per column");
    }
    for (Index j = 0; j < n_; ++j) {
        const auto& c = cols_[j];
        if (c.empty()) {
            throw std::invalid_argument("SubspacePattern: column " + std::to_string(j) +
                                        " is empty");
        }
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (c[k] < 0 || c[k] >= n_ || (k > 0 && c[k] <= c[k - 1])) {
                throw std::invalid_argument("SubspacePattern: column " + std::to_string(j) +
                                            " not sorted/unique/in range");
            }
        }
    }
}

SubspacePattern SubspacePattern::diagonal(Index n)
{
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) cols[j] = {j};
    return SubspacePattern(n, std::move(cols));
}

bool SubspacePattern::contains(Index i, Index j) const
{
    const auto& c = col(j);
    return std::binary_search(c.begin(), c.end(), i);
}

bool SubspacePattern::contains_diagonal() const
{
    for (Index j = 0; j < n_; ++j) {
        if (!contains(j, j)) return false;
    }
    return true;
}

std::size_t SubspacePattern::nonZeros() const
{
    std::size_t nnz = 0;
    for (const auto& c : cols_) nnz += c.size();
    return nnz;
}

bool SubspacePattern::is_subset_of(const SubspacePattern& other) const
{
    if (other.n_ != n_) return false;
    for (Index j = 0; j < n_; ++j) {
        if (!std::includes(other.cols_[j].begin(), other.cols_[j].end(), cols_[j].begin(),
                           cols_[j].end())) {
            return false;
        }
    }
    return true;
}

SubspacePattern pattern_subtract_offdiag(const SubspacePattern& W, const SubspacePattern& V0)
{
    if (W.size() != V0.size()) {
        throw std::invalid_argument("pattern_subtract_offdiag: dimension mismatch");
    }
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(W.size()));
    for (Index j = 0; j < W.size(); ++j) {
        const auto& v0 = V0.col(j);
        for (Index i : W.col(j)) {
            if (i == j || !std::binary_search(v0.begin(), v0.end(), i)) cols[j].push_back(i);
        }
        // A column that only held V0 positions keeps its diagonal so the
        // result remains a valid subspace.
        if (cols[j].empty()) cols[j].push_back(j);
    }
    return SubspacePattern(W.size(), std::move(cols));
}

namespace {

std::string lower(std::string s)
{
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

}  // namespace

SparseMatrixd parse_matrix_market(std::istream& in, const std::string& source)
{
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(source, 1, "empty file");
    ++lineno;
    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") {
        throw ParseError(source, lineno, "missing %%MatrixMarket banner");
    }
    object = lower(object);
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (object != "matrix" || format != "coordinate") {
        throw UnsupportedFormat(source + ": only 'matrix coordinate' is supported");
    }
    if (field != "real" && field != "integer" && field != "double") {
        throw UnsupportedFormat(source + ": unsupported field '" + field + "'");
    }
    const bool symmetric = symmetry == "symmetric";
    const bool skew = symmetry == "skew-symmetric";
    if (!symmetric && !skew && symmetry != "general") {
        throw UnsupportedFormat(source + ": unsupported symmetry '" + symmetry + "'");
    }

    do {
        if (!std::getline(in, line)) throw ParseError(source, lineno + 1, "missing size line");
        ++lineno;
    } while (line.empty() || line[0] == '%' || line.find_first_not_of(" \t\r") == std::string::npos);

    long long rows = 0, cols = 0, nnz = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
            throw ParseError(source, lineno, "malformed size line");
        }
    }

    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(symmetric || skew ? 2 * nnz : nnz));
    long long read = 0;
    while (read < nnz && std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%' ||
            line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream ss(line);
        long long i = 0, j = 0;
        double v = 0;
        if (!(ss >> i >> j >> v)) throw ParseError(source, lineno, "malformed entry");
        if (i < 1 || i > rows || j < 1 || j > cols) {
            throw ParseError(source, lineno, "entry index out of range");
        }
        entries.push_back({i - 1, j - 1, v});
        if ((symmetric || skew) && i != j) entries.push_back({j - 1, i - 1, skew ? -v : v});
        ++read;
    }
    if (read < nnz) {
        throw ParseError(source, lineno, "expected " + std::to_string(nnz) + " entries, found " +
                                             std::to_string(read));
    }
    return SparseMatrixd::from_triplets(rows, cols, std::move(entries));
}

SparseMatrixd read_matrix_market(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_matrix_market(in, path);
}

void write_matrix_market(const SparseMatrixd& A, std::ostream& out)
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    char buf[64];
    for (Index j = 0; j < A.cols(); ++j) {
        auto r = A.col_rows(j);
        auto v = A.col_values(j);
        for (std::size_t k = 0; k < r.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", v[k]);
            out << r[k] + 1 << ' ' << j + 1 << ' ' << buf << '\n';
        }
    }
}

void write_matrix_market(const SparseMatrixd& A, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_matrix_market(A, out);
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace diaf
