#include "mgdl/network.hpp"

#include <fstream>
#include <sstream>

#include "mgdl/errors.hpp"

namespace mgdl {

namespace {

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || a == b);
}

bool same(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

void check_layers(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    if (layers[j].in_width == 0 || layers[j].out_width == 0) {
      throw ShapeError("layer " + std::to_string(j + 1) + " has zero width");
    }
    if (j > 0 && layers[j].in_width != layers[j - 1].out_width) {
      throw ShapeError("layer " + std::to_string(j + 1) + " expects width " +
                       std::to_string(layers[j].in_width) +
                       " but layer " + std::to_string(j) + " produces " +
                       std::to_string(layers[j - 1].out_width));
    }
  }
}

}  // namespace

ShallowNet::ShallowNet(std::vector<LayerSpec> layers,
                       std::vector<Matrix> weights, std::vector<Vector> biases)
    : layers_(std::move(layers)),
      weights_(std::move(weights)),
      biases_(std::move(biases)) {
  check_layers(layers_);
  if (weights_.size() != layers_.size() || biases_.size() != layers_.size()) {
    throw ShapeError("expected " + std::to_string(layers_.size()) +
                     " weight matrices and bias vectors");
  }
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    const auto rows = static_cast<Eigen::Index>(layers_[j].out_width);
    const auto cols = static_cast<Eigen::Index>(layers_[j].in_width);
    if (weights_[j].rows() != rows || weights_[j].cols() != cols ||
        biases_[j].size() != rows) {
      throw ShapeError("layer " + std::to_string(j + 1) +
                       ": parameters do not match " + std::to_string(rows) +
                       "x" + std::to_string(cols));
    }
  }
}

ShallowNet ShallowNet::zeros(std::vector<LayerSpec> layers) {
  check_layers(layers);
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (const LayerSpec& l : layers) {
    w.push_back(Matrix::Zero(static_cast<Eigen::Index>(l.out_width),
                             static_cast<Eigen::Index>(l.in_width)));
    b.push_back(Vector::Zero(static_cast<Eigen::Index>(l.out_width)));
  }
  return ShallowNet(std::move(layers), std::move(w), std::move(b));
}

std::size_t ShallowNet::parameter_count() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers_) n += l.out_width * l.in_width + l.out_width;
  return n;
}

Vector ShallowNet::forward(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != in_width()) {
    throw ShapeError("network expects input width " +
                     std::to_string(in_width()) + ", got " +
                     std::to_string(x.size()));
  }
  Vector h = x;
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    h = activate(layers_[j].activation, affine(weights_[j], h, biases_[j], j + 1));
  }
  return h;
}

Matrix ShallowNet::forward(const Matrix& x) const {
  return forward_layers(layers_, weights_, biases_, x);
}

Matrix forward_layers(const std::vector<LayerSpec>& layers,
                      const std::vector<Matrix>& weights,
                      const std::vector<Vector>& biases, const Matrix& x) {
  if (layers.empty()) return x;
  if (static_cast<std::size_t>(x.rows()) != layers.front().in_width) {
    throw ShapeError("network expects input width " +
                     std::to_string(layers.front().in_width) + ", got " +
                     std::to_string(x.rows()));
  }
  Matrix h = x;
  for (std::size_t j = 0; j < layers.size(); ++j) {
    Matrix z = weights[j] * h;
    z.colwise() += biases[j];
    h = activate(layers[j].activation, z);
  }
  return h;
}

ShallowNet ShallowNet::with_parameters(std::vector<Matrix> weights,
                                       std::vector<Vector> biases) const {
  return ShallowNet(layers_, std::move(weights), std::move(biases));
}

std::vector<Matrix> ShallowNet::flat_parameters() const {
  std::vector<Matrix> flat;
  flat.reserve(2 * layers_.size());
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    flat.push_back(weights_[j]);
    flat.push_back(biases_[j]);
  }
  return flat;
}

ShallowNet ShallowNet::from_flat(std::vector<LayerSpec> layers,
                                 const std::vector<Matrix>& flat) {
  if (flat.size() != 2 * layers.size()) {
    throw ShapeError("expected " + std::to_string(2 * layers.size()) +
                     " parameter blocks, got " + std::to_string(flat.size()));
  }
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (std::size_t j = 0; j < layers.size(); ++j) {
    w.push_back(flat[2 * j]);
    if (flat[2 * j + 1].cols() != 1) {
      throw ShapeError("bias block " + std::to_string(j + 1) + " is not a column");
    }
    b.push_back(flat[2 * j + 1].col(0));
  }
  return ShallowNet(std::move(layers), std::move(w), std::move(b));
}

Tape::Var ShallowNet::trace(Tape& tape, Tape::Var input) const {
  Tape::Var h = input;
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    Tape::Var w = tape.parameter(weights_[j]);
    Tape::Var b = tape.parameter(biases_[j]);
    h = tape.add_bias(tape.matmul(w, h), b);
    if (layers_[j].activation != ActivationKind::Identity) {
      h = tape.activate(layers_[j].activation, h);
    }
  }
  return h;
}

bool ShallowNet::operator==(const ShallowNet& other) const {
  if (layers_ != other.layers_) return false;
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    if (!same(weights_[j], other.weights_[j]) ||
        !same(biases_[j], other.biases_[j])) {
      return false;
    }
  }
  return true;
}

ShallowNet strip_output_layer(const ShallowNet& net) {
  if (net.depth() < 2) {
    throw UsageError("cannot strip the output layer of a single-layer network");
  }
  std::vector<LayerSpec> layers(net.layers().begin(), net.layers().end() - 1);
  std::vector<Matrix> w(net.weights().begin(), net.weights().end() - 1);
  std::vector<Vector> b(net.biases().begin(), net.biases().end() - 1);
  return ShallowNet(std::move(layers), std::move(w), std::move(b));
}

// ---------------------------------------------------------------------------

FrozenStack::FrozenStack(std::size_t input_width, std::vector<ShallowNet> stages)
    : input_width_(input_width), stages_(std::move(stages)) {
  std::size_t width = input_width_;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (stages_[i].in_width() != width) {
      throw ShapeError("frozen stage " + std::to_string(i + 1) +
                       " expects width " + std::to_string(stages_[i].in_width()) +
                       ", stack provides " + std::to_string(width));
    }
    width = stages_[i].out_width();
  }
}

FrozenStack FrozenStack::then(const ShallowNet& net) const {
  std::vector<ShallowNet> stages = stages_;
  stages.push_back(net);
  return FrozenStack(input_width_, std::move(stages));
}

Vector FrozenStack::forward(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != input_width_) {
    throw ShapeError("frozen stack expects input width " +
                     std::to_string(input_width_) + ", got " +
                     std::to_string(x.size()));
  }
  Vector h = x;
  for (const ShallowNet& net : stages_) h = net.forward(h);
  return h;
}

Matrix FrozenStack::forward(const Matrix& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_width_) {
    throw ShapeError("frozen stack expects input width " +
                     std::to_string(input_width_) + ", got " +
                     std::to_string(x.rows()));
  }
  Matrix h = x;
  for (const ShallowNet& net : stages_) h = net.forward(h);
  return h;
}

// ---------------------------------------------------------------------------

Vector GradeRecord::contribution(const Vector& x) const {
  return net.forward(prefix.forward(x));
}

Matrix GradeRecord::contribution(const Matrix& x) const {
  return net.forward(prefix.forward(x));
}

FrozenStack GradeRecord::next_stack() const {
  return prefix.then(output_layer_stripped_in_stack ? strip_output_layer(net)
                                                     : net);
}

void MultiGradeModel::append(GradeRecord grade) {
  if (grade.net.out_width() != output_width_) {
    throw ShapeError("grade " + std::to_string(grades_.size() + 1) +
                     " outputs width " + std::to_string(grade.net.out_width()) +
                     ", model output width is " + std::to_string(output_width_));
  }
  if (!(grade.prefix == next_stack())) {
    throw ShapeError("grade " + std::to_string(grades_.size() + 1) +
                     " was not trained on the current frozen stack");
  }
  if (grade.net.in_width() != grade.prefix.output_width()) {
    throw ShapeError("grade " + std::to_string(grades_.size() + 1) +
                     " expects width " + std::to_string(grade.net.in_width()) +
                     ", stack provides " +
                     std::to_string(grade.prefix.output_width()));
  }
  grades_.push_back(std::move(grade));
}

FrozenStack MultiGradeModel::next_stack() const {
  if (grades_.empty()) return FrozenStack(input_width_);
  return grades_.back().next_stack();
}

Vector MultiGradeModel::predict(const Vector& x) const {
  if (grades_.empty()) throw UsageError("predict on a model with no grades");
  Vector sum = grades_.front().contribution(x);
  for (std::size_t i = 1; i < grades_.size(); ++i) {
    sum += grades_[i].contribution(x);
  }
  return sum;
}

Matrix MultiGradeModel::predict(const Matrix& x) const {
  return predict_prefix(x, grades_.size());
}

Matrix MultiGradeModel::predict_prefix(const Matrix& x,
                                       std::size_t grades) const {
  if (grades_.empty()) throw UsageError("predict on a model with no grades");
  if (grades == 0 || grades > grades_.size()) {
    throw UsageError("grade prefix " + std::to_string(grades) +
                     " out of range");
  }
  // Each stage is evaluated once; the running features are shared.
  Matrix sum;
  Matrix features = x;
  if (static_cast<std::size_t>(x.rows()) != input_width_) {
    throw ShapeError("model expects input width " +
                     std::to_string(input_width_) + ", got " +
                     std::to_string(x.rows()));
  }
  for (std::size_t i = 0; i < grades; ++i) {
    const GradeRecord& g = grades_[i];
    Matrix out = g.net.forward(features);
    if (i == 0) {
      sum = out;
    } else {
      sum += out;
    }
    if (i + 1 < grades) {
      features = g.output_layer_stripped_in_stack
                     ? strip_output_layer(g.net).forward(features)
                     : std::move(out);
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------

std::vector<GradeSummary> flatten_for_report(const MultiGradeModel& model) {
  std::vector<GradeSummary> out;
  for (std::size_t i = 0; i < model.grades().size(); ++i) {
    const GradeRecord& g = model.grades()[i];
    GradeSummary s;
    s.grade = i + 1;
    s.widths.push_back(g.prefix.input_width());
    s.frozen.push_back(false);
    for (const ShallowNet& stage : g.prefix.stages()) {
      s.frozen_parameters += stage.parameter_count();
      for (const LayerSpec& l : stage.layers()) {
        s.widths.push_back(l.out_width);
        s.frozen.push_back(true);
      }
    }
    for (const LayerSpec& l : g.net.layers()) {
      s.widths.push_back(l.out_width);
      s.frozen.push_back(false);
    }
    s.trainable_parameters = g.net.parameter_count();
    std::ostringstream text;
    text << "Grade " << s.grade << ": ";
    for (std::size_t k = 0; k < s.widths.size(); ++k) {
      if (k) text << "→";
      text << '[' << s.widths[k] << ']' << (s.frozen[k] ? "_F" : "");
    }
    s.text = text.str();
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json to_json(const ShallowNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t j = 0; j < net.depth(); ++j) {
    const LayerSpec& l = net.layers()[j];
    const Matrix& w = net.weights()[j];
    nlohmann::json flat = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    const Vector& b = net.biases()[j];
    layers.push_back({{"in_width", l.in_width},
                      {"out_width", l.out_width},
                      {"activation", std::string(to_string(l.activation))},
                      {"weights", std::move(flat)},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layers", std::move(layers)}};
}

ShallowNet shallow_net_from_json(const nlohmann::json& j) {
  try {
    std::vector<LayerSpec> layers;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    for (const auto& lj : j.at("layers")) {
      LayerSpec l{lj.at("in_width").get<std::size_t>(),
                  lj.at("out_width").get<std::size_t>(),
                  activation_from_string(lj.at("activation").get<std::string>())};
      const auto flat = lj.at("weights").get<std::vector<double>>();
      const auto bias = lj.at("bias").get<std::vector<double>>();
      if (flat.size() != l.in_width * l.out_width || bias.size() != l.out_width) {
        throw ShapeError("serialized layer " + std::to_string(layers.size() + 1) +
                         " has the wrong number of entries");
      }
      Matrix w(static_cast<Eigen::Index>(l.out_width),
               static_cast<Eigen::Index>(l.in_width));
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
      }
      layers.push_back(l);
      weights.push_back(std::move(w));
      biases.push_back(Eigen::Map<const Vector>(bias.data(),
                                                static_cast<Eigen::Index>(bias.size())));
    }
    return ShallowNet(std::move(layers), std::move(weights), std::move(biases));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network JSON: ") + e.what());
  }
}

nlohmann::json to_json(const MultiGradeModel& model) {
  nlohmann::json grades = nlohmann::json::array();
  for (const GradeRecord& g : model.grades()) {
    nlohmann::json gj = to_json(g.net);
    gj["output_layer_stripped_in_stack"] = g.output_layer_stripped_in_stack;
    grades.push_back(std::move(gj));
  }
  return {{"format", "multigrade-model"},
          {"schema_version", 1},
          {"input_width", model.input_width()},
          {"output_width", model.output_width()},
          {"grades", std::move(grades)}};
}

MultiGradeModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "multigrade-model") {
      throw ConfigError("not a multigrade model document");
    }
    MultiGradeModel model(j.at("input_width").get<std::size_t>(),
                          j.at("output_width").get<std::size_t>());
    for (const auto& gj : j.at("grades")) {
      GradeRecord g{shallow_net_from_json(gj), model.next_stack(),
                    gj.at("output_layer_stripped_in_stack").get<bool>()};
      model.append(std::move(g));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model JSON: ") + e.what());
  }
}

void save_model(const MultiGradeModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(model).dump() << '\n';
  if (!out) throw IoError("write failed for " + path);
}

MultiGradeModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mgdl
