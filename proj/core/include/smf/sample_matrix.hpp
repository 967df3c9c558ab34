#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace smf {

enum class FieldKind { Gaussian, ScaleMixture, Observed };

std::string_view to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view name);

/// n x J block of field values, one row per realization and one column per
/// site. Scale-mixture samples carry the scaling draw v_i used for each row.
class SampleMatrix {
public:
    SampleMatrix(Eigen::MatrixXd values, FieldKind kind,
                 std::optional<Eigen::VectorXd> v_draws = std::nullopt);

    Eigen::Index rows() const noexcept { return values_.rows(); }
    Eigen::Index cols() const noexcept { return values_.cols(); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    FieldKind kind() const noexcept { return kind_; }
    const std::optional<Eigen::VectorXd>& v_draws() const noexcept { return v_draws_; }

private:
    Eigen::MatrixXd values_;
    FieldKind kind_;
    std::optional<Eigen::VectorXd> v_draws_;
};

}  // namespace smf
