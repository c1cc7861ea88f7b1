#include "lrl/problem_io.hpp"

#include <charconv>
#include <fstream>

#include "lrl/linalg.hpp"

namespace lrl {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, std::string_view where) {
  if (!obj.is_object()) throw FormatError(std::string(where) + ": expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw FormatError(std::string(where) + ": missing required key '" + key + "'");
  return *it;
}

Index require_index(const json& obj, const char* key, std::string_view where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer())
    throw FormatError(std::string(where) + "/" + key + ": expected an integer");
  return v.get<Index>();
}

double require_number(const json& obj, const char* key, std::string_view where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw FormatError(std::string(where) + "/" + key + ": expected a number");
  return v.get<double>();
}

}  // namespace

std::string format_double(double x) {
  // shortest representation that parses back to the same double
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json matrix_to_json(const Matrix& m) {
  json arr = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  return arr;
}

Vector vector_from_json(const json& j, std::string_view where) {
  if (!j.is_array()) throw FormatError(std::string(where) + ": expected an array of numbers");
  Vector out(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number())
      throw FormatError(std::string(where) + "[" + std::to_string(k) + "]: expected a number");
    out(static_cast<Index>(k)) = j[k].get<double>();
  }
  return out;
}

Matrix matrix_from_json(const json& j, Index rows, Index cols, std::string_view where) {
  const Vector flat = vector_from_json(j, where);
  if (flat.size() != rows * cols)
    throw ValidationError(std::string(where) + ": expected " + std::to_string(rows * cols) +
                          " entries for a " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " matrix, got " + std::to_string(flat.size()));
  return unflatten(flat, rows, cols);
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json instance_to_json(const ProblemInstance& inst) {
  json doc;
  doc["version"] = kProblemFileVersion;
  doc["d1"] = inst.op.rows();
  doc["d2"] = inst.op.cols();
  doc["n"] = inst.op.measurement_count();
  doc["lambda"] = inst.lambda;
  json op;
  op["kind"] = std::string(to_string(inst.op.kind()));
  if (inst.op.kind() == OperatorKind::Gaussian) {
    op["seed"] = *inst.op.seed();
  } else if (inst.op.kind() == OperatorKind::Explicit) {
    json mats = json::array();
    for (Index i = 0; i < inst.op.measurement_count(); ++i)
      mats.push_back(vector_to_json(inst.op.design().row(i).transpose()));
    op["matrices"] = std::move(mats);
  }
  doc["operator"] = std::move(op);
  doc["y"] = vector_to_json(inst.y);
  if (inst.ground_truth) {
    doc["ground_truth"] = {{"m_star", matrix_to_json(inst.ground_truth->m_star)},
                           {"xi", vector_to_json(inst.ground_truth->xi)},
                           {"r_star", inst.ground_truth->r_star}};
  }
  return doc;
}

ProblemInstance instance_from_json(const json& doc) {
  const Index version = require_index(doc, "version", "problem");
  if (version != kProblemFileVersion)
    throw FormatError("problem: unsupported file version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kProblemFileVersion) + ")");
  const Index d1 = require_index(doc, "d1", "problem");
  const Index d2 = require_index(doc, "d2", "problem");
  const Index n = require_index(doc, "n", "problem");
  const double lambda = require_number(doc, "lambda", "problem");
  if (d1 < 1 || d2 < 1) throw ValidationError("problem: d1 and d2 must be positive");
  if (n < 1) throw ValidationError("problem: n must be positive");

  const json& opj = require(doc, "operator", "problem");
  const json& kindj = require(opj, "kind", "problem/operator");
  if (!kindj.is_string()) throw FormatError("problem/operator/kind: expected a string");
  const OperatorKind kind = operator_kind_from_string(kindj.get<std::string>());

  auto op = [&]() -> SensingOperator {
    switch (kind) {
      case OperatorKind::Gaussian: {
        const json& seedj = require(opj, "seed", "problem/operator");
        if (!seedj.is_number_unsigned() && !seedj.is_number_integer())
          throw FormatError("problem/operator/seed: expected an unsigned integer");
        return SensingOperator::gaussian(d1, d2, n, seedj.get<std::uint64_t>());
      }
      case OperatorKind::Identity:
        if (n != d1 * d2)
          throw ValidationError("problem: identity operator requires n = d1*d2 = " +
                                std::to_string(d1 * d2) + ", file says n = " + std::to_string(n));
        return SensingOperator::identity(d1, d2);
      case OperatorKind::Explicit: {
        const json& mats = require(opj, "matrices", "problem/operator");
        if (!mats.is_array()) throw FormatError("problem/operator/matrices: expected an array");
        if (static_cast<Index>(mats.size()) != n)
          throw ValidationError("problem/operator/matrices: expected n = " + std::to_string(n) +
                                " matrices, got " + std::to_string(mats.size()));
        Matrix design(n, d1 * d2);
        for (Index i = 0; i < n; ++i) {
          const std::string where = "problem/operator/matrices[" + std::to_string(i) + "]";
          const Vector row = vector_from_json(mats[static_cast<std::size_t>(i)], where);
          if (row.size() != d1 * d2)
            throw ValidationError(where + ": expected " + std::to_string(d1 * d2) + " entries");
          design.row(i) = row.transpose();
        }
        return SensingOperator::from_design(d1, d2, std::move(design));
      }
    }
    throw FormatError("problem/operator/kind: unsupported");
  }();

  Vector y = vector_from_json(require(doc, "y", "problem"), "problem/y");
  ProblemInstance inst{std::move(op), std::move(y), lambda, std::nullopt};
  if (auto it = doc.find("ground_truth"); it != doc.end() && !it->is_null()) {
    GroundTruth gt;
    gt.m_star = matrix_from_json(require(*it, "m_star", "problem/ground_truth"), d1, d2,
                                 "problem/ground_truth/m_star");
    gt.xi = vector_from_json(require(*it, "xi", "problem/ground_truth"), "problem/ground_truth/xi");
    gt.r_star = require_index(*it, "r_star", "problem/ground_truth");
    inst.ground_truth = std::move(gt);
  }
  validate(inst);
  return inst;
}

ProblemInstance parse_instance(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("problem: ") + e.what());
  }
  return instance_from_json(doc);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

void save_instance(const std::filesystem::path& path, const ProblemInstance& inst) {
  write_json_file(path, instance_to_json(inst));
}

ProblemInstance load_instance(const std::filesystem::path& path) {
  return instance_from_json(read_json_file(path));
}

}  // namespace lrl
