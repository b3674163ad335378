#pragma once

#include <cmath>
#include <span>
#include <string>

#include "rssmlp/error.hpp"
#include "rssmlp/matrix.hpp"

namespace rssmlp {

enum class LossKind { Exp, Log };

inline LossKind parse_loss(const std::string& s) {
    if (s == "exp") return LossKind::Exp;
    if (s == "log") return LossKind::Log;
    throw ContractViolation("unknown loss '" + s + "' (expected exp|log)");
}

inline const char* to_string(LossKind k) {
    return k == LossKind::Exp ? "exp" : "log";
}

// Margin losses phi(alpha) on the signed agreement alpha = target * output.
inline double loss_value(LossKind kind, double alpha) {
    if (kind == LossKind::Exp) return std::exp(-alpha);
    // ln(1 + e^-a), evaluated on the side that never overflows.
    if (alpha > 0.0) return std::log1p(std::exp(-alpha));
    return -alpha + std::log1p(std::exp(alpha));
}

// d phi / d alpha.
inline double loss_grad(LossKind kind, double alpha) {
    if (kind == LossKind::Exp) return -std::exp(-alpha);
    // -sigmoid(-a) = -1 / (1 + e^a), stable on both sides.
    if (alpha > 0.0) {
        const double e = std::exp(-alpha);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(alpha));
}

// Class c's target sign for an integer label: +1 on the true class, -1 off it.
inline double margin_target(int label, int c) { return label == c ? 1.0 : -1.0; }

struct BatchRisk {
    double risk = 0.0;  // mean of phi over all (row, class) pairs
    Matrix grad;        // d risk / d outputs, same shape as outputs
};

// Multiclass surrogate risk: each output column is scored against the signed
// target of its class and the per-cell losses are averaged.
inline BatchRisk batch_risk(LossKind kind, const Matrix& outputs,
                            std::span<const int> labels) {
    if (outputs.rows != labels.size()) {
        throw ContractViolation("batch_risk: outputs rows != labels length");
    }
    if (outputs.rows == 0 || outputs.cols == 0) {
        throw ContractViolation("batch_risk: empty batch");
    }
    BatchRisk out;
    out.grad = Matrix(outputs.rows, outputs.cols);
    const double scale = 1.0 / static_cast<double>(outputs.rows * outputs.cols);
    std::vector<double> cell(outputs.rows * outputs.cols);
    for (std::size_t i = 0; i < outputs.rows; ++i) {
        for (std::size_t j = 0; j < outputs.cols; ++j) {
            const double t = margin_target(labels[i], static_cast<int>(j));
            const double alpha = t * outputs(i, j);
            cell[i * outputs.cols + j] = loss_value(kind, alpha);
            out.grad(i, j) = scale * t * loss_grad(kind, alpha);
        }
    }
    out.risk = scale * pairwise_sum(cell);
    return out;
}

// Inverse of psi_exp(x) = 1 - sqrt(1 - x^2) on [0, 1]; used to translate a
// surrogate-risk bound into a 0-1 risk bound.
inline double psi_inverse_exp(double theta) {
    if (theta < 0.0 || theta > 1.0) {
        throw DomainError("psi_inverse_exp: argument outside [0, 1]");
    }
    const double one_minus = 1.0 - theta;
    return std::sqrt(1.0 - one_minus * one_minus);
}

}  // namespace rssmlp
