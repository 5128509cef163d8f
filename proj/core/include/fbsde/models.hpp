#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbsde/lq.hpp"

namespace fbsde {

// A named coefficient model instantiated from configuration parameters,
// together with the certificate it is meant to satisfy. The two control
// models also carry their problem data so the runner can invoke the control
// pipeline.
struct ModelInstance {
    CoefficientSet coeffs;
    DomMonCert cert;
    std::optional<ForwardLQSpec> flq;
    std::optional<BackwardLQSpec> blq;
};

// Registry: "linear" (matrix-valued maps, certificate supplied by the
// caller), "saturating" (componentwise smooth clamp with prescribed
// constants, certificate derived), "lq-flq" and "lq-blq" (control problems,
// certificate assembled from the problem data).
ModelInstance build_model(const std::string& name, const nlohmann::json& params, double rho, int horizon,
                          const DomMonCert* user_cert);

std::vector<std::string> registered_models();

Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const std::string& what);
Eigen::VectorXd parse_vector(const nlohmann::json& j, const std::string& what);

}  // namespace fbsde
