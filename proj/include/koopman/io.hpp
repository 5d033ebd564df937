#pragma once

#include "koopman/edmd.hpp"
#include "koopman/error_analysis.hpp"
#include "koopman/sdp.hpp"
#include "koopman/synthesis.hpp"

#include <json.hpp>

namespace koopman::io
{

using nlohmann::json;

/// Matrices are row-major nested arrays.
json to_json(const Matrix& M);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);

/// {"m": int, "c": [...], "margin": r, "blocks": [{"size": s, "F": [F0, F1, ..., Fm]}]}
json problem_to_json(const SdpProblem& p);
SdpProblem problem_from_json(const json& j);

json to_json(const SynthesisResult& r);
SynthesisResult synthesis_from_json(const json& j);
json to_json(const ErrorBound& b);
/// {"A": [[...]], "B": [[...]], "residual_fro": r, ...}
json to_json(const EdmdResult& r);

} // namespace koopman::io
