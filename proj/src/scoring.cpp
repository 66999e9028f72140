#include "kge/scoring.hpp"

#include <cmath>

#include "kge/text.hpp"

namespace kge {

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double int_pow(double base, int exp) {
    double r = 1.0;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// out += scale * dK(a, b)/da
void add_kernel_grad(const KernelSpec& k, std::span<const double> a, std::span<const double> b, double scale,
                     std::span<double> out) {
    switch (k.kind) {
        case KernelKind::linear:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] += scale * b[i];
            return;
        case KernelKind::gaussian: {
            const double s2 = k.sigma * k.sigma;
            const double kv = std::exp(-squared_distance(a, b) / s2);
            const double c = scale * kv * (-2.0 / s2);
            for (std::size_t i = 0; i < a.size(); ++i) out[i] += c * (a[i] - b[i]);
            return;
        }
        case KernelKind::polynomial: {
            const double c = scale * k.degree * int_pow(dot(a, b) + k.offset, k.degree - 1);
            for (std::size_t i = 0; i < a.size(); ++i) out[i] += c * b[i];
            return;
        }
    }
}

// out += scale * dK(a, a)/da; symmetric kernels give twice the first-argument derivative.
void add_self_kernel_grad(const KernelSpec& k, std::span<const double> a, double scale, std::span<double> out) {
    add_kernel_grad(k, a, a, 2.0 * scale, out);
}

void resize_bundle(GradientBundle& g, std::size_t dim, bool tail_relations) {
    g.head.assign(dim, 0.0);
    g.tail.assign(dim, 0.0);
    g.relation.assign(dim, 0.0);
    if (tail_relations) {
        g.relation_tail.assign(dim, 0.0);
    } else {
        g.relation_tail.clear();
    }
    g.manifold_param = 0.0;
}

void check_indices(const Triple& t, const EmbeddingModel& m) {
    if (t.head >= m.entity_count() || t.tail >= m.entity_count() || t.relation >= m.relation_count()) {
        throw std::out_of_range("triple index outside model bounds");
    }
}

}  // namespace

KernelSpec KernelSpec::gaussian(double sigma) {
    KernelSpec k;
    k.kind = KernelKind::gaussian;
    k.sigma = sigma;
    k.validate();
    return k;
}

KernelSpec KernelSpec::polynomial(int degree, double offset) {
    KernelSpec k;
    k.kind = KernelKind::polynomial;
    k.degree = degree;
    k.offset = offset;
    k.validate();
    return k;
}

void KernelSpec::validate() const {
    if (kind == KernelKind::gaussian && !(sigma > 0.0 && std::isfinite(sigma))) {
        throw ConfigurationError("gaussian kernel needs a positive bandwidth");
    }
    if (kind == KernelKind::polynomial && (degree < 1 || !std::isfinite(offset))) {
        throw ConfigurationError("polynomial kernel needs degree >= 1 and a finite offset");
    }
}

std::string to_string(const KernelSpec& k) {
    switch (k.kind) {
        case KernelKind::linear: return "linear";
        case KernelKind::gaussian: return "gaussian:" + format_double(k.sigma);
        case KernelKind::polynomial: return "poly:" + std::to_string(k.degree) + ":" + format_double(k.offset);
    }
    return "?";
}

KernelSpec parse_kernel(const std::string& text) {
    auto parts = split(text, ':');
    if (parts[0] == "linear" && parts.size() == 1) return KernelSpec::linear();
    if (parts[0] == "gaussian" && parts.size() == 2) {
        if (auto s = parse_double(parts[1])) return KernelSpec::gaussian(*s);
    }
    if (parts[0] == "poly" && parts.size() == 3) {
        auto p = parse_int(parts[1]);
        auto c = parse_double(parts[2]);
        if (p && c) return KernelSpec::polynomial(static_cast<int>(*p), *c);
    }
    throw ConfigurationError("bad kernel '" + text + "' (expected linear, gaussian:<sigma> or poly:<p>:<c>)");
}

std::string_view to_string(ManifoldKind k) { return k == ManifoldKind::sphere ? "sphere" : "hyperplane"; }

void ManifoldSpec::validate() const {
    kernel.validate();
    if (absolute && kind != ManifoldKind::hyperplane) {
        throw ConfigurationError("the absolute-value variant applies to the hyperplane manifold only");
    }
    if (absolute && kernel.kind != KernelKind::linear) {
        throw ConfigurationError("the absolute-value hyperplane requires the linear kernel");
    }
}

EmbeddingModel EmbeddingModel::allocate(std::size_t entities, std::size_t relations, std::size_t dim,
                                        const ManifoldSpec& manifold, bool transe_baseline) {
    manifold.validate();
    EmbeddingModel m;
    m.dim = dim;
    m.manifold = manifold;
    m.transe_baseline = transe_baseline;
    m.entities = Matrix(entities, dim);
    m.relations = Matrix(relations, dim);
    if (m.uses_tail_relations()) m.relations_tail = Matrix(relations, dim);
    m.manifold_params.assign(relations, 1.0);
    return m;
}

double kernel_eval(const KernelSpec& kernel, std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b);
    switch (kernel.kind) {
        case KernelKind::linear: return dot(a, b);
        case KernelKind::gaussian: return std::exp(-squared_distance(a, b) / (kernel.sigma * kernel.sigma));
        case KernelKind::polynomial: return int_pow(dot(a, b) + kernel.offset, kernel.degree);
    }
    return 0.0;
}

double sphere_kernel_expansion(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                               const KernelSpec& kernel) {
    require_same_dim(h, r);
    require_same_dim(h, t);
    return kernel_eval(kernel, h, h) + kernel_eval(kernel, t, t) + kernel_eval(kernel, r, r) -
           2.0 * kernel_eval(kernel, h, t) - 2.0 * kernel_eval(kernel, r, t) + 2.0 * kernel_eval(kernel, r, h);
}

double manifold_sphere(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                       const KernelSpec& kernel) {
    if (kernel.kind != KernelKind::linear) return sphere_kernel_expansion(h, r, t, kernel);
    require_same_dim(h, r);
    require_same_dim(h, t);
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double e = h[i] + r[i] - t[i];
        s += e * e;
    }
    return s;
}

double manifold_hyperplane(std::span<const double> h, std::span<const double> r_head, std::span<const double> t,
                           std::span<const double> r_tail, const KernelSpec& kernel, bool absolute) {
    require_same_dim(h, r_head);
    require_same_dim(h, t);
    require_same_dim(h, r_tail);
    if (absolute && kernel.kind != KernelKind::linear) {
        throw ConfigurationError("the absolute-value hyperplane requires the linear kernel");
    }
    const std::size_t d = h.size();
    if (kernel.kind == KernelKind::linear) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double u = h[i] + r_head[i];
            const double v = t[i] + r_tail[i];
            s += absolute ? std::abs(u) * std::abs(v) : u * v;
        }
        return s;
    }
    std::vector<double> u(d), v(d);
    for (std::size_t i = 0; i < d; ++i) {
        u[i] = h[i] + r_head[i];
        v[i] = t[i] + r_tail[i];
    }
    return kernel_eval(kernel, u, v);
}

double manifold_value(const Triple& triple, const EmbeddingModel& model) {
    check_indices(triple, model);
    const auto h = model.entities.row(triple.head);
    const auto t = model.entities.row(triple.tail);
    const auto r = model.relations.row(triple.relation);
    if (model.transe_baseline) return manifold_sphere(h, r, t, KernelSpec::linear());
    if (model.manifold.kind == ManifoldKind::sphere) return manifold_sphere(h, r, t, model.manifold.kernel);
    return manifold_hyperplane(h, r, t, model.relations_tail.row(triple.relation), model.manifold.kernel,
                               model.manifold.absolute);
}

double score(const Triple& triple, const EmbeddingModel& model) {
    const double m = manifold_value(triple, model);
    if (model.transe_baseline) return m;
    const double d = model.manifold_params[triple.relation];
    const double residual = m - d * d;
    return residual * residual;
}

void score_gradients(const Triple& triple, const EmbeddingModel& model, GradientBundle& out) {
    check_indices(triple, model);
    const std::size_t dim = model.dim;
    resize_bundle(out, dim, model.uses_tail_relations());

    const auto h = model.entities.row(triple.head);
    const auto t = model.entities.row(triple.tail);
    const auto r = model.relations.row(triple.relation);

    if (model.transe_baseline) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double e = 2.0 * (h[i] + r[i] - t[i]);
            out.head[i] = e;
            out.relation[i] = e;
            out.tail[i] = -e;
        }
        return;
    }

    const double d = model.manifold_params[triple.relation];
    const KernelSpec& k = model.manifold.kernel;

    if (model.manifold.kind == ManifoldKind::sphere) {
        const double m = manifold_sphere(h, r, t, k);
        const double coef = 2.0 * (m - d * d);
        out.manifold_param = coef * (-2.0 * d);
        if (coef == 0.0) return;
        if (k.kind == KernelKind::linear) {
            for (std::size_t i = 0; i < dim; ++i) {
                const double e = coef * 2.0 * (h[i] + r[i] - t[i]);
                out.head[i] = e;
                out.relation[i] = e;
                out.tail[i] = -e;
            }
            return;
        }
        add_self_kernel_grad(k, h, coef, out.head);
        add_kernel_grad(k, h, t, -2.0 * coef, out.head);
        add_kernel_grad(k, h, r, 2.0 * coef, out.head);

        add_self_kernel_grad(k, t, coef, out.tail);
        add_kernel_grad(k, t, h, -2.0 * coef, out.tail);
        add_kernel_grad(k, t, r, -2.0 * coef, out.tail);

        add_self_kernel_grad(k, r, coef, out.relation);
        add_kernel_grad(k, r, t, -2.0 * coef, out.relation);
        add_kernel_grad(k, r, h, 2.0 * coef, out.relation);
        return;
    }

    const auto rt = model.relations_tail.row(triple.relation);
    std::vector<double> u(dim), v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        u[i] = h[i] + r[i];
        v[i] = t[i] + rt[i];
    }
    const bool absolute = model.manifold.absolute;
    double m = 0.0;
    if (absolute) {
        for (std::size_t i = 0; i < dim; ++i) m += std::abs(u[i]) * std::abs(v[i]);
    } else {
        m = kernel_eval(k, u, v);
    }
    const double coef = 2.0 * (m - d * d);
    out.manifold_param = coef * (-2.0 * d);
    if (coef == 0.0) return;

    if (absolute) {
        for (std::size_t i = 0; i < dim; ++i) {
            out.head[i] = coef * sign(u[i]) * std::abs(v[i]);
            out.tail[i] = coef * sign(v[i]) * std::abs(u[i]);
        }
    } else {
        add_kernel_grad(k, u, v, coef, out.head);
        add_kernel_grad(k, v, u, coef, out.tail);
    }
    out.relation = out.head;
    out.relation_tail = out.tail;
}

GradientBundle score_gradients(const Triple& triple, const EmbeddingModel& model) {
    GradientBundle g;
    score_gradients(triple, model, g);
    return g;
}

}  // namespace kge
