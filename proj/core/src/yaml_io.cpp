#include "yaml_io.hpp"

#include "dualbound/errors.hpp"

namespace dualbound::yaml_io {

void emit_matrix(YAML::Emitter& out, const MatC& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out << m(r, c).real() << m(r, c).imag();
  out << YAML::EndSeq;
}

MatC parse_matrix(const YAML::Node& node, Index rows, Index cols, const std::string& path) {
  if (!node || !node.IsSequence() || static_cast<Index>(node.size()) != 2 * rows * cols)
    throw DomainError(path + ": expected " + std::to_string(2 * rows * cols) + " numbers (row-major re, im pairs)");
  MatC m(rows, cols);
  size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c, k += 2) m(r, c) = cplx(node[k].as<double>(), node[k + 1].as<double>());
  return m;
}

void emit_noise(YAML::Emitter& out, const noise::NoiseModel& model) {
  out << YAML::BeginMap << YAML::Key << "model" << YAML::Value << noise::kind_name(model);
  std::visit(
      [&out](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, noise::Depolarizing>) {
          out << YAML::Key << "p" << YAML::Value << m.p;
        } else if constexpr (std::is_same_v<T, noise::UnitalPauli>) {
          out << YAML::Key << "px" << YAML::Value << m.px;
          out << YAML::Key << "py" << YAML::Value << m.py;
          out << YAML::Key << "pz" << YAML::Value << m.pz;
          out << YAML::Key << "u" << YAML::Value;
          emit_matrix(out, m.u);
          out << YAML::Key << "v" << YAML::Value;
          emit_matrix(out, m.v);
        } else if constexpr (std::is_same_v<T, noise::Replacement>) {
          out << YAML::Key << "q" << YAML::Value << m.q;
          out << YAML::Key << "tau" << YAML::Value;
          emit_matrix(out, m.tau);
        } else {
          out << YAML::Key << "choi" << YAML::Value;
          emit_matrix(out, m.choi);
        }
      },
      model);
  out << YAML::EndMap;
}

noise::NoiseModel parse_noise(const YAML::Node& node, const std::string& path) {
  if (!node || !node.IsMap()) throw DomainError(path + ": expected a mapping");
  const auto kind = node["model"] ? node["model"].as<std::string>() : std::string("depolarizing");
  auto num = [&](const char* key, double fallback) {
    return node[key] ? node[key].as<double>() : fallback;
  };
  noise::NoiseModel model;
  if (kind == "depolarizing") {
    model = noise::Depolarizing{num("p", 0.0)};
  } else if (kind == "unital_pauli") {
    noise::UnitalPauli u{num("px", 0.0), num("py", 0.0), num("pz", 0.0), Mat2::Identity(), Mat2::Identity()};
    if (node["u"]) u.u = parse_matrix(node["u"], 2, 2, path + ".u");
    if (node["v"]) u.v = parse_matrix(node["v"], 2, 2, path + ".v");
    model = u;
  } else if (kind == "replacement") {
    noise::Replacement r{num("q", 0.0), Mat2::Identity() / 2.0};
    if (node["tau"]) {
      r.tau = parse_matrix(node["tau"], 2, 2, path + ".tau");
    } else {
      r.tau(0, 0) += num("epsilon", 0.0);
      r.tau(1, 1) -= num("epsilon", 0.0);
    }
    model = r;
  } else if (kind == "general") {
    model = noise::GeneralChannel{parse_matrix(node["choi"], 4, 4, path + ".choi")};
  } else {
    throw DomainError(path + ".model: unknown noise model '" + kind + "'");
  }
  try {
    noise::validate(model);
  } catch (const DomainError& e) {
    throw DomainError(path + ": " + e.what());
  }
  return model;
}

}  // namespace dualbound::yaml_io
