#include "pfmix/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pfmix {

using nlohmann::json;

namespace {

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};

json gmm_to_json(const GmmParams& p) {
  return json{{"theta", vector_to_json(p.theta.weights())},
              {"b_mean", matrix_to_json(p.b_mean)},
              {"b_var", matrix_to_json(p.b_var)},
              {"pi_mean", vector_to_json(p.pi_mean)},
              {"pi_var", vector_to_json(p.pi_var)},
              {"eta", matrix_to_json(p.eta)}};
}

GmmParams gmm_from_json(const json& j) {
  GmmParams p;
  p.theta = Simplex(vector_from_json(j.at("theta")));
  p.b_mean = matrix_from_json(j.at("b_mean"));
  p.b_var = matrix_from_json(j.at("b_var"));
  p.pi_mean = vector_from_json(j.at("pi_mean"));
  p.pi_var = vector_from_json(j.at("pi_var"));
  p.eta = matrix_from_json(j.at("eta"));
  p.validate();
  return p;
}

json logreg_to_json(const LogRegModel& m) {
  return json{{"weights", matrix_to_json(m.weights)}, {"bias", vector_to_json(m.bias)}, {"l2", m.l2}};
}

LogRegModel logreg_from_json(const json& j) {
  LogRegModel m;
  m.weights = matrix_from_json(j.at("weights"));
  m.bias = vector_from_json(j.at("bias"));
  m.l2 = j.at("l2").get<double>();
  if (m.bias.size() != m.weights.rows()) throw DataError("model file: classifier bias/weights mismatch");
  return m;
}

HmmParams hmm_from_json(const json& j) {
  HmmParams p;
  p.gmm = gmm_from_json(j);
  p.A = matrix_from_json(j.at("A"));
  p.validate();
  return p;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw DataError("model file: expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError("model file: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw DataError("model file: expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json to_json(const Model& model) {
  json doc{{"format", "pfmix-model"},
           {"version", kModelFormatVersion},
           {"library_version", PFMIX_VERSION},
           {"kind", std::string(to_string(model.kind))},
           {"p", model.p},
           {"K", model.K},
           {"seed", model.seed},
           {"fit", {{"converged", model.converged}, {"iterations", model.iterations}, {"elbo_trace", model.elbo_trace}}}};
  std::visit(overloaded{[&](const MixtureModel& m) {
                          doc["params"] = gmm_to_json(m.params);
                          doc["phi"] = vector_to_json(m.phi.values());
                        },
                        [&](const HmmModel& m) {
                          doc["params"] = gmm_to_json(m.params.gmm);
                          doc["params"]["A"] = matrix_to_json(m.params.A);
                          doc["phi"] = vector_to_json(m.phi.values());
                        },
                        [&](const TwoStepGmmModel& m) {
                          doc["params"] = gmm_to_json(m.params);
                          doc["phi"] = vector_to_json(m.phi.values());
                          doc["classifier"] = logreg_to_json(m.classifier);
                        },
                        [&](const TwoStepHmmModel& m) {
                          doc["params"] = gmm_to_json(m.params.gmm);
                          doc["params"]["A"] = matrix_to_json(m.params.A);
                          doc["phi"] = vector_to_json(m.phi.values());
                          doc["classifier"] = logreg_to_json(m.classifier);
                        },
                        [&](const LogRegModel& m) { doc["classifier"] = logreg_to_json(m); }},
             model.body);
  return doc;
}

Model model_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "pfmix-model") throw DataError("not a pfmix model file");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model file version " + std::to_string(version));
    Model m;
    m.kind = parse_model_kind(doc.at("kind").get<std::string>());
    m.p = doc.at("p").get<double>();
    m.K = doc.at("K").get<int>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    const auto& fit = doc.at("fit");
    m.converged = fit.at("converged").get<bool>();
    m.iterations = fit.at("iterations").get<int>();
    m.elbo_trace = fit.at("elbo_trace").get<std::vector<double>>();
    switch (m.kind) {
      case ModelKind::pf_gmm:
      case ModelKind::sup_gmm:
        m.body = MixtureModel{gmm_from_json(doc.at("params")), SwitchPosterior(vector_from_json(doc.at("phi")))};
        break;
      case ModelKind::pf_hmm:
      case ModelKind::sup_hmm:
        m.body = HmmModel{hmm_from_json(doc.at("params")), SwitchPosterior(vector_from_json(doc.at("phi")))};
        break;
      case ModelKind::two_step_gmm:
        m.body = TwoStepGmmModel{gmm_from_json(doc.at("params")), SwitchPosterior(vector_from_json(doc.at("phi"))),
                                 logreg_from_json(doc.at("classifier"))};
        break;
      case ModelKind::two_step_hmm:
        m.body = TwoStepHmmModel{hmm_from_json(doc.at("params")), SwitchPosterior(vector_from_json(doc.at("phi"))),
                                 logreg_from_json(doc.at("classifier"))};
        break;
      case ModelKind::logreg:
        m.body = logreg_from_json(doc.at("classifier"));
        break;
    }
    if (const auto* phi = m.switches(); phi && phi->size() != m.dims())
      throw DataError("model file: phi length does not match the input dimension");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(model).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace pfmix
