#pragma once

#include <string>

#include "ctxnorm/context.hpp"
#include "ctxnorm/gmm.hpp"
#include "ctxnorm/model.hpp"
#include "ctxnorm/norm.hpp"

namespace ctxnorm {

// JSON codecs. Doubles survive a round trip bit-exactly; malformed input
// raises "parse-error" (with position) and unsupported versions
// "bad-version".

std::string norm_state_to_json(const NormState& state);
NormState norm_state_from_json(const std::string& text);

std::string gmm_to_json(const GmmModel& model);
GmmModel gmm_from_json(const std::string& text);

std::string kmeans_to_json(const KMeansModel& model);
KMeansModel kmeans_from_json(const std::string& text);

std::string checkpoint_to_json(const Mlp& model);
Mlp checkpoint_from_json(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace ctxnorm
