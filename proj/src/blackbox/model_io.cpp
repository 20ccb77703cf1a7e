#include "maskexplain/model_io.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "maskexplain/tensor_io.hpp"
#include "maskexplain/tiny_cnn.hpp"

namespace maskexplain {

namespace {

Tensor make_tensor(std::vector<std::uint32_t> dims, const std::vector<double>& values) {
  Tensor t;
  t.dims = std::move(dims);
  t.values.assign(values.begin(), values.end());
  if (t.values.size() != t.element_count()) throw ShapeMismatch("tensor dims do not match values");
  return t;
}

std::vector<double> as_doubles(const Tensor& t) { return {t.values.begin(), t.values.end()}; }

using Named = std::vector<std::pair<std::string, Tensor>>;

Named model_tensors(const BlackBox& model) {
  const InputShape s = model.input_shape();
  const auto h = static_cast<std::uint32_t>(s.height), w = static_cast<std::uint32_t>(s.width),
             ch = static_cast<std::uint32_t>(s.channels);
  const auto classes = static_cast<std::uint32_t>(model.num_classes());
  Named out;
  if (const auto* cnn = dynamic_cast<const TinyCnn*>(&model)) {
    const auto& p = cnn->params();
    const auto f1 = static_cast<std::uint32_t>(TinyCnn::kConv1Filters);
    const auto f2 = static_cast<std::uint32_t>(TinyCnn::kConv2Filters);
    out.emplace_back("conv1.weight", make_tensor({f1, 3, 3, ch}, p.conv1_w));
    out.emplace_back("conv1.bias", make_tensor({f1}, p.conv1_b));
    out.emplace_back("conv2.weight", make_tensor({f2, 3, 3, f1}, p.conv2_w));
    out.emplace_back("conv2.bias", make_tensor({f2}, p.conv2_b));
    out.emplace_back("fc.weight",
                     make_tensor({classes, static_cast<std::uint32_t>(cnn->feature_count())}, p.fc_w));
    out.emplace_back("fc.bias", make_tensor({classes}, p.fc_b));
  } else if (const auto* lin = dynamic_cast<const LinearModel*>(&model)) {
    std::vector<double> all;
    for (const Image& img : lin->weights()) all.insert(all.end(), img.data.begin(), img.data.end());
    out.emplace_back("weight", make_tensor({classes, h, w, ch}, all));
    out.emplace_back("bias", make_tensor({classes}, lin->biases()));
  } else if (const auto* reg = dynamic_cast<const RegionMeanModel*>(&model)) {
    std::vector<double> all;
    for (const BinaryMask& r : reg->regions()) all.insert(all.end(), r.data.begin(), r.data.end());
    out.emplace_back("regions", make_tensor({classes, h, w}, all));
  } else {
    throw InvalidInput("model kind '" + model.kind() + "' cannot be serialized");
  }
  return out;
}

}  // namespace

void save_model(const std::filesystem::path& dir, const BlackBox& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  const InputShape s = model.input_shape();
  std::ostringstream manifest;
  manifest << "# kind=" << model.kind() << " input=" << s.height << 'x' << s.width << 'x' << s.channels
           << " classes=" << model.num_classes() << '\n';
  for (const auto& [name, t] : model_tensors(model)) {
    manifest << name;
    for (auto d : t.dims) manifest << ' ' << d;
    manifest << '\n';
    write_mpt1(dir / (name + ".mpt1"), t);
  }
  write_text(dir / "manifest.txt", manifest.str());
}

std::unique_ptr<BlackBox> load_model(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.txt")) throw IoError("model manifest not found in " + dir.string());
  std::istringstream manifest(read_text(dir / "manifest.txt"));
  std::string line;
  std::getline(manifest, line);
  std::string kind;
  InputShape shape;
  int classes = 0;
  {
    std::istringstream head(line);
    std::string tok;
    head >> tok;
    if (tok != "#") throw IoError("manifest header missing");
    while (head >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
      if (key == "kind") kind = value;
      else if (key == "classes") classes = std::stoi(value);
      else if (key == "input" && std::sscanf(value.c_str(), "%dx%dx%d", &shape.height, &shape.width, &shape.channels) != 3)
        throw IoError("bad input shape in manifest");
    }
  }
  std::map<std::string, Tensor> tensors;
  while (std::getline(manifest, line)) {
    std::istringstream row(line);
    std::string name;
    if (!(row >> name)) continue;
    std::vector<std::uint32_t> dims;
    for (std::uint32_t d; row >> d;) dims.push_back(d);
    Tensor t = read_mpt1(dir / (name + ".mpt1"));
    if (t.dims != dims) throw IoError("tensor " + name + " does not match manifest shape");
    tensors.emplace(name, std::move(t));
  }
  auto get = [&](const std::string& name) -> const Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("manifest lacks tensor " + name);
    return it->second;
  };

  if (kind == "tiny_cnn") {
    TinyCnn::Params p;
    p.conv1_w = as_doubles(get("conv1.weight"));
    p.conv1_b = as_doubles(get("conv1.bias"));
    p.conv2_w = as_doubles(get("conv2.weight"));
    p.conv2_b = as_doubles(get("conv2.bias"));
    p.fc_w = as_doubles(get("fc.weight"));
    p.fc_b = as_doubles(get("fc.bias"));
    return std::make_unique<TinyCnn>(shape, classes, std::move(p));
  }
  if (kind == "linear") {
    const Tensor& w = get("weight");
    const Tensor& b = get("bias");
    std::vector<Image> weights;
    const std::size_t per = static_cast<std::size_t>(shape.height) * shape.width * shape.channels;
    for (int c = 0; c < classes; ++c) {
      Image img(shape.height, shape.width, shape.channels);
      for (std::size_t i = 0; i < per; ++i) img.data[i] = w.values[c * per + i];
      weights.push_back(std::move(img));
    }
    return std::make_unique<LinearModel>(std::move(weights), as_doubles(b));
  }
  if (kind == "region_mean") {
    const Tensor& r = get("regions");
    std::vector<BinaryMask> regions;
    const std::size_t per = static_cast<std::size_t>(shape.height) * shape.width;
    for (int c = 0; c < classes; ++c) {
      BinaryMask m(shape.height, shape.width, 0);
      for (std::size_t i = 0; i < per; ++i) m.data[i] = r.values[c * per + i] != 0.0f;
      regions.push_back(std::move(m));
    }
    return std::make_unique<RegionMeanModel>(shape, std::move(regions));
  }
  throw IoError("unknown model kind '" + kind + "'");
}

}  // namespace maskexplain
