#include "ctxnorm/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ctxnorm/data.hpp"
#include "ctxnorm/error.hpp"

namespace ctxnorm {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, int expect_cols = -1) {
  if (!rows.is_array()) fail("parse-error", "matrix must be an array");
  const int r = static_cast<int>(rows.size());
  int c = expect_cols;
  if (r > 0 && c < 0) c = static_cast<int>(rows.at(0).size());
  if (c < 0) c = 0;
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    const json& row = rows.at(i);
    if (static_cast<int>(row.size()) != c)
      fail("parse-error", "ragged matrix row at index " + std::to_string(i));
    for (int j = 0; j < c; ++j) m.at(i, j) = row.at(j).get<double>();
  }
  return m;
}

json nested_to_json(const std::vector<ChannelVector>& rows) {
  json out = json::array();
  for (const ChannelVector& row : rows) out.push_back(row);
  return out;
}

std::vector<ChannelVector> nested_from_json(const json& rows) {
  std::vector<ChannelVector> out;
  for (const json& row : rows) out.push_back(row.get<ChannelVector>());
  return out;
}

// Every decoder funnels through this so malformed documents surface the
// same error code with the parser's position info.
template <typename Fn>
auto decode(const std::string& text, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    fail("parse-error", e.what());
  }
}

json norm_state_to_value(const NormState& state) {
  return json{{"k", state.k()},
              {"eps", state.eps},
              {"alpha", state.alpha},
              {"gamma", state.gamma},
              {"beta", state.beta},
              {"lambda", state.lambda},
              {"running_mean", nested_to_json(state.running_mean)},
              {"running_var", nested_to_json(state.running_var)},
              {"batches_seen", state.batches_seen}};
}

NormState norm_state_from_value(const json& j) {
  NormState state;
  state.eps = j.at("eps").get<double>();
  state.alpha = j.at("alpha").get<double>();
  state.gamma = j.at("gamma").get<ChannelVector>();
  state.beta = j.at("beta").get<ChannelVector>();
  state.lambda = j.at("lambda").get<std::vector<double>>();
  state.running_mean = nested_from_json(j.at("running_mean"));
  state.running_var = nested_from_json(j.at("running_var"));
  state.batches_seen = j.value("batches_seen", std::int64_t{0});
  if (j.at("k").get<int>() != state.k())
    fail("parse-error", "context count does not match lambda length");
  return state;
}

json gmm_to_value(const GmmModel& model) {
  return json{{"k", model.k()},
              {"weights", model.weights},
              {"means", matrix_to_json(model.means)},
              {"vars", matrix_to_json(model.vars)}};
}

GmmModel gmm_from_value(const json& j) {
  GmmModel model;
  model.weights = j.at("weights").get<std::vector<double>>();
  model.means = matrix_from_json(j.at("means"));
  model.vars = matrix_from_json(j.at("vars"), model.means.cols);
  if (j.at("k").get<int>() != model.k() || model.means.rows != model.k() ||
      model.vars.rows != model.k())
    fail("parse-error", "component count disagreement");
  return model;
}

const char* norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::kNone: return "none";
    case NormKind::kBatch: return "bn";
    case NormKind::kLayer: return "ln";
    case NormKind::kInstance: return "in";
    case NormKind::kMixture: return "mn";
    case NormKind::kContext: return "sbn";
  }
  fail("bad-config", "unknown normalization kind");
}

NormKind norm_kind_from_name(const std::string& name) {
  if (name == "none") return NormKind::kNone;
  if (name == "bn") return NormKind::kBatch;
  if (name == "ln") return NormKind::kLayer;
  if (name == "in") return NormKind::kInstance;
  if (name == "mn") return NormKind::kMixture;
  if (name == "sbn") return NormKind::kContext;
  fail("parse-error", "unknown normalization kind '" + name + "'");
}

}  // namespace

std::string norm_state_to_json(const NormState& state) {
  return norm_state_to_value(state).dump();
}

NormState norm_state_from_json(const std::string& text) {
  return decode(text, [](const json& j) { return norm_state_from_value(j); });
}

std::string gmm_to_json(const GmmModel& model) { return gmm_to_value(model).dump(); }

GmmModel gmm_from_json(const std::string& text) {
  return decode(text, [](const json& j) { return gmm_from_value(j); });
}

std::string kmeans_to_json(const KMeansModel& model) {
  return json{{"k", model.k()},
              {"dim", model.dim()},
              {"centroids", matrix_to_json(model.centroids)},
              {"inertia", model.inertia},
              {"iterations_run", model.iterations_run}}
      .dump();
}

KMeansModel kmeans_from_json(const std::string& text) {
  return decode(text, [](const json& j) {
    KMeansModel model;
    model.centroids = matrix_from_json(j.at("centroids"), j.at("dim").get<int>());
    model.inertia = j.value("inertia", 0.0);
    model.iterations_run = j.value("iterations_run", 0);
    if (j.at("k").get<int>() != model.k())
      fail("parse-error", "centroid count disagreement");
    return model;
  });
}

std::string checkpoint_to_json(const Mlp& model) {
  json layers = json::array();
  for (const MlpLayer& layer : model.layers) {
    json jl{{"weight", matrix_to_json(layer.weight)},
            {"in_dim", layer.in_dim()},
            {"bias", layer.bias},
            {"norm", norm_kind_name(layer.norm)},
            {"relu", layer.relu}};
    jl["state"] = (layer.norm == NormKind::kNone) ? json(nullptr)
                                                  : norm_state_to_value(layer.state);
    jl["mixture"] =
        (layer.mixture.k() == 0) ? json(nullptr) : gmm_to_value(layer.mixture);
    layers.push_back(std::move(jl));
  }
  return json{{"version", 1}, {"class_count", model.class_count}, {"layers", layers}}
      .dump();
}

Mlp checkpoint_from_json(const std::string& text) {
  return decode(text, [](const json& j) {
    if (j.at("version").get<int>() != 1) fail("bad-version", "unsupported checkpoint version");
    Mlp model;
    model.class_count = j.at("class_count").get<int>();
    for (const json& jl : j.at("layers")) {
      MlpLayer layer;
      layer.weight = matrix_from_json(jl.at("weight"), jl.at("in_dim").get<int>());
      layer.bias = jl.at("bias").get<ChannelVector>();
      layer.norm = norm_kind_from_name(jl.at("norm").get<std::string>());
      layer.relu = jl.at("relu").get<bool>();
      if (!jl.at("state").is_null()) layer.state = norm_state_from_value(jl.at("state"));
      if (!jl.at("mixture").is_null()) layer.mixture = gmm_from_value(jl.at("mixture"));
      model.layers.push_back(std::move(layer));
    }
    return model;
  });
}

void save_dataset(const Dataset& ds, const std::string& path) {
  json j{{"version", 1},
         {"dim", ds.dim()},
         {"classes", ds.classes},
         {"features", matrix_to_json(ds.features)},
         {"class_labels", ds.class_labels},
         {"meta",
          {{"generator", ds.meta.generator},
           {"k_true", ds.meta.k_true},
           {"seed", ds.meta.seed}}}};
  j["context_labels"] = ds.has_contexts() ? json(ds.context_labels) : json(nullptr);
  write_text_file(path, j.dump());
}

Dataset load_dataset(const std::string& path) {
  return decode(read_text_file(path), [](const json& j) {
    if (j.at("version").get<int>() != 1) fail("bad-version", "unsupported dataset version");
    Dataset ds;
    ds.features = matrix_from_json(j.at("features"), j.at("dim").get<int>());
    ds.class_labels = j.at("class_labels").get<std::vector<int>>();
    if (!j.at("context_labels").is_null())
      ds.context_labels = j.at("context_labels").get<std::vector<int>>();
    ds.classes = j.at("classes").get<int>();
    const json& meta = j.at("meta");
    ds.meta.generator = meta.at("generator").get<std::string>();
    ds.meta.k_true = meta.at("k_true").get<int>();
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    if (static_cast<int>(ds.class_labels.size()) != ds.n() ||
        (ds.has_contexts() && static_cast<int>(ds.context_labels.size()) != ds.n()))
      fail("parse-error", "label length does not match feature rows");
    return ds;
  });
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("parse-error", "cannot open '" + path + "' for writing");
  out << text;
  if (!out.flush()) fail("parse-error", "short write to '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("parse-error", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ctxnorm
