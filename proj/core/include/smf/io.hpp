#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "smf/covmodel.hpp"
#include "smf/mixture.hpp"
#include "smf/sample_matrix.hpp"

namespace smf {

/// Numeric CSV: optional '#' comment lines, one header row, then rows of
/// numbers. Fields may be double-quoted.
struct CsvTable {
    std::vector<std::string> comments;  // without the leading '#'
    std::vector<std::string> columns;
    Eigen::MatrixXd data;

    /// Index of a named column or -1.
    Eigen::Index column(std::string_view name) const;
};

/// Parse errors throw InputError as "<path>:<line>: <reason>".
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");

/// Shortest round-trip text for a double.
std::string format_double(double v);

/// Writes "# <comment>" (when non-empty), the header and the rows.
void write_csv(const std::filesystem::path& path, std::string_view comment, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& data);
std::string format_csv(std::string_view comment, const std::vector<std::string>& columns, const Eigen::MatrixXd& data);

/// Columns s1..sJ, plus a trailing "v" column for scale-mixture samples.
void write_sample_matrix_csv(const std::filesystem::path& path, std::string_view comment, const SampleMatrix& m);
/// A trailing "v" column marks a scale-mixture sample; otherwise `kind` is used.
SampleMatrix read_sample_matrix_csv(const std::filesystem::path& path, FieldKind kind = FieldKind::Observed);

/// "SMX1", u32 n, u32 J, then n * J little-endian f64 in row-major order.
void write_smx1(const std::filesystem::path& path, const Eigen::MatrixXd& data);
Eigen::MatrixXd read_smx1(const std::filesystem::path& path);

/// Columns x, y and any number of covariate columns.
struct SitesFile {
    SiteSet sites;
    CovariateTable covariates;
    std::vector<std::string> covariate_names;
};
SitesFile read_sites_csv(const std::filesystem::path& path, bool allow_coincident = false);

/// Columns weight, shape, scale.
GammaMixture read_mixture_csv(const std::filesystem::path& path, MeanPolicy policy = MeanPolicy::AllowUnnormalized);
void write_mixture_csv(const std::filesystem::path& path, std::string_view comment, const GammaMixture& mix);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace smf
