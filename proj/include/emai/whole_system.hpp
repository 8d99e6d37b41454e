#pragma once

// Closed-loop whole-system impedance Z_w = (E + Z_N·Y)^-1·Z_N with the
// block-diagonal source admittance Y, and its characteristic determinant.

#include "emai/admittance.hpp"
#include "emai/network.hpp"

#include <map>
#include <memory>

namespace emai {

/// Exact multiplicative gauges on one source's admittance:
/// Y' = (1+y)·[(1+mc)·y_c + (1+mc)(1+sd)·y_cs + (1+sd)·y_s],
/// i.e. Y_mc scaled by (1+mc) and 1/U^PLL scaled by (1+sd).
struct Perturbation {
    double y = 0.0;
    double mc = 0.0;
    double sd = 0.0;
    bool is_zero() const { return y == 0.0 && mc == 0.0 && sd == 0.0; }
};

struct SourcePort {
    int bus = 0;
    Eigen::Index block = 0;
    std::shared_ptr<const GflAdmittance> model;
    Perturbation gauge;

    Mat2c admittance(Complex s) const {
        if (gauge.is_zero()) return model->y_full(s);
        const AdmittanceParts p = model->parts(s);
        const double a = 1.0 + gauge.mc, b = 1.0 + gauge.sd;
        return (1.0 + gauge.y) * (a * p.y_c + a * b * p.y_cs + b * p.y_s);
    }
};

class WholeSystem {
public:
    WholeSystem(const SystemConfig& cfg, const OperatingPoint& op)
        : WholeSystem(cfg, op, cfg.solver.delay_model, cfg.solver.pade_order) {}

    WholeSystem(const SystemConfig& cfg, const OperatingPoint& op, DelayModel delay_model, int pade_order)
        : cfg_(std::make_shared<const SystemConfig>(cfg)),
          op_(std::make_shared<const OperatingPoint>(op)),
          network_(std::make_shared<const NetworkImpedance>(cfg)),
          delay_model_(delay_model),
          pade_order_(pade_order) {
        for (const SourceSpec* s : cfg.gfl_sources()) {
            const GflOperatingPoint g = source_operating_point(op, *s, cfg.solver.min_source_voltage);
            add_source(s->gfl, g);
        }
    }

    const SystemConfig& config() const { return *cfg_; }
    const OperatingPoint& operating_point() const { return *op_; }
    const NetworkImpedance& network() const { return *network_; }
    const std::vector<SourcePort>& sources() const { return sources_; }
    DelayModel delay_model() const { return delay_model_; }
    int pade_order() const { return pade_order_; }
    Eigen::Index size() const { return network_->size(); }

    const SourcePort& source(int bus) const {
        for (const auto& s : sources_)
            if (s.bus == bus) return s;
        throw Error(ErrorKind::config, "bus " + std::to_string(bus) + " hosts no GFL");
    }

    /// Copy with one source's admittance gauges replaced.
    WholeSystem perturbed(int bus, const Perturbation& p) const {
        WholeSystem w = *this;
        w.mutable_source(bus).gauge = p;
        return w;
    }

    /// Copy with one source's control parameters replaced (equilibrium unchanged).
    WholeSystem with_params(int bus, const GflParams& params) const {
        WholeSystem w = *this;
        SourcePort& s = w.mutable_source(bus);
        s.model = std::make_shared<const GflAdmittance>(params, s.model->op(), cfg_->omega_base(), delay_model_,
                                                        pade_order_);
        return w;
    }

    /// Block-diagonal source admittance over the non-slack ports.
    MatXc y_dq(Complex s) const {
        MatXc y = MatXc::Zero(size(), size());
        for (const auto& src : sources_) y.block<2, 2>(2 * src.block, 2 * src.block) = src.admittance(s);
        return y;
    }

    MatXc z_w(Complex s) const {
        const MatXc zn = network_->z_n(s);
        if (sources_.empty()) return zn;
        const MatXc m = MatXc::Identity(size(), size()) + zn * y_dq(s);
        Eigen::PartialPivLU<MatXc> lu(m);
        return lu.solve(zn);
    }

    Mat2c z_wm(Complex s, int bus) const {
        const Eigen::Index k = network_->block(bus);
        if (k < 0) throw Error(ErrorKind::config, "bus " + std::to_string(bus) + " is not a network port");
        return z_w(s).block<2, 2>(2 * k, 2 * k);
    }

    Complex det(Complex s) const {
        const MatXc zn = network_->z_n(s);
        const MatXc m = MatXc::Identity(size(), size()) + zn * y_dq(s);
        return Eigen::PartialPivLU<MatXc>(m).determinant();
    }

    /// Largest sampling period over sources (0 when all are undelayed).
    double max_t_s() const {
        double t = 0.0;
        for (const auto& s : sources_) t = std::max(t, s.model->params().t_s);
        return t;
    }

private:
    void add_source(const GflParams& params, const GflOperatingPoint& g) {
        SourcePort p;
        p.bus = g.bus;
        p.block = network_->block(g.bus);
        if (p.block < 0) throw Error(ErrorKind::config, "GFL on the slack bus");
        p.model = std::make_shared<const GflAdmittance>(params, g, cfg_->omega_base(), delay_model_, pade_order_);
        sources_.push_back(std::move(p));
    }

    SourcePort& mutable_source(int bus) {
        for (auto& s : sources_)
            if (s.bus == bus) return s;
        throw Error(ErrorKind::config, "bus " + std::to_string(bus) + " hosts no GFL");
    }

    std::shared_ptr<const SystemConfig> cfg_;
    std::shared_ptr<const OperatingPoint> op_;
    std::shared_ptr<const NetworkImpedance> network_;
    DelayModel delay_model_;
    int pade_order_;
    std::vector<SourcePort> sources_;
};

inline WholeSystem assemble(const SystemConfig& cfg, const OperatingPoint& op) { return WholeSystem(cfg, op); }

}  // namespace emai
