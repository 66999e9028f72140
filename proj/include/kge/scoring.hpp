#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kge/core.hpp"

namespace kge {

class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class KernelKind { linear, gaussian, polynomial };

struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    double sigma = 1.0;  // gaussian bandwidth
    int degree = 2;      // polynomial degree p
    double offset = 0.0; // polynomial offset c

    static KernelSpec linear() { return {}; }
    static KernelSpec gaussian(double sigma);
    static KernelSpec polynomial(int degree, double offset);

    void validate() const;

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

// "linear", "gaussian:<sigma>", "poly:<p>:<c>"
std::string to_string(const KernelSpec& k);
KernelSpec parse_kernel(const std::string& text);

enum class ManifoldKind { sphere, hyperplane };

std::string_view to_string(ManifoldKind k);

struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::sphere;
    bool absolute = false;  // hyperplane only, linear kernel only
    KernelSpec kernel;

    // Throws ConfigurationError for absolute with a non-linear kernel or on a sphere.
    void validate() const;

    friend bool operator==(const ManifoldSpec&, const ManifoldSpec&) = default;
};

struct EmbeddingModel {
    std::size_t dim = 0;
    ManifoldSpec manifold;
    bool transe_baseline = false;

    Matrix entities;        // E x d
    Matrix relations;       // R x d; r for sphere/TransE, r_head for hyperplane
    Matrix relations_tail;  // R x d for hyperplane (r_tail), empty otherwise
    // D_r per relation, stored unconstrained; the score uses D_r^2.
    std::vector<double> manifold_params;

    std::size_t entity_count() const noexcept { return entities.rows(); }
    std::size_t relation_count() const noexcept { return relations.rows(); }
    bool uses_tail_relations() const noexcept { return !transe_baseline && manifold.kind == ManifoldKind::hyperplane; }

    // Zero-filled parameters with consistent shapes; D_r = 1.
    static EmbeddingModel allocate(std::size_t entities, std::size_t relations, std::size_t dim,
                                   const ManifoldSpec& manifold, bool transe_baseline);

    friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;
};

struct GradientBundle {
    std::vector<double> head;
    std::vector<double> tail;
    std::vector<double> relation;
    std::vector<double> relation_tail;  // hyperplane only
    double manifold_param = 0.0;
};

double kernel_eval(const KernelSpec& kernel, std::span<const double> a, std::span<const double> b);

// M(h,r,t) = ||h + r - t||^2 in the kernel's feature space. The linear kernel takes the direct
// route; other kernels use the six-term kernel expansion.
double manifold_sphere(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                       const KernelSpec& kernel);

// K(h,h) + K(t,t) + K(r,r) - 2K(h,t) - 2K(r,t) + 2K(r,h), for any kernel including linear.
double sphere_kernel_expansion(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                               const KernelSpec& kernel);

double manifold_hyperplane(std::span<const double> h, std::span<const double> r_head, std::span<const double> t,
                           std::span<const double> r_tail, const KernelSpec& kernel, bool absolute);

// Manifold value M for a triple under the model; for the TransE baseline, ||h + r - t||^2.
double manifold_value(const Triple& triple, const EmbeddingModel& model);

// (M - D_r^2)^2, or ||h + r - t||^2 in TransE baseline mode. Smaller is more plausible.
double score(const Triple& triple, const EmbeddingModel& model);

void score_gradients(const Triple& triple, const EmbeddingModel& model, GradientBundle& out);
GradientBundle score_gradients(const Triple& triple, const EmbeddingModel& model);

}  // namespace kge
