#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qfluct {

enum class errc {
    invalid_argument,
    pole_evaluation,
    cluster_ambiguity,
    syntax_error,
    semantic_error,
    mode_unsupported_element,
    singular_kinetic,
    no_immittance,
    not_lossless_pr,
    residue_not_psd,
    no_constant_eigenspace,
    not_lossless,
    free_particle_sector,
    not_psd,
    resonant_evaluation,
    zero_frequency,
    lossy_measure,
    quadrature_under_resolved,
    spectral_form_required,
    infrared_divergent,
    no_ports,
};

inline const char* errc_name(errc c) {
    switch (c) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::pole_evaluation: return "PoleEvaluation";
    case errc::cluster_ambiguity: return "ClusterAmbiguity";
    case errc::syntax_error: return "SyntaxError";
    case errc::semantic_error: return "SemanticError";
    case errc::mode_unsupported_element: return "ModeUnsupportedElement";
    case errc::singular_kinetic: return "SingularKinetic";
    case errc::no_immittance: return "NoImmittance";
    case errc::not_lossless_pr: return "NotLosslessPR";
    case errc::residue_not_psd: return "ResidueNotPSD";
    case errc::no_constant_eigenspace: return "NoConstantEigenspace";
    case errc::not_lossless: return "NotLossless";
    case errc::free_particle_sector: return "FreeParticleSector";
    case errc::not_psd: return "NotPSD";
    case errc::resonant_evaluation: return "ResonantEvaluation";
    case errc::zero_frequency: return "ZeroFrequency";
    case errc::lossy_measure: return "LossyMeasure";
    case errc::quadrature_under_resolved: return "QuadratureUnderResolved";
    case errc::spectral_form_required: return "SpectralFormRequired";
    case errc::infrared_divergent: return "InfraredDivergent";
    case errc::no_ports: return "NoPorts";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    errc code() const noexcept { return code_; }
    const char* name() const noexcept { return errc_name(code_); }
    bool is_parse_error() const noexcept {
        return code_ == errc::syntax_error || code_ == errc::semantic_error;
    }

private:
    errc code_;
};

// line and col are 1-based
class syntax_error : public error {
public:
    syntax_error(std::size_t line, std::size_t col, const std::string& msg)
        : error(errc::syntax_error,
                "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + msg),
          line_(line), col_(col) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t line_, col_;
};

[[noreturn]] inline void raise(errc c, const std::string& msg) { throw error(c, msg); }

} // namespace qfluct
