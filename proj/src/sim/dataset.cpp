#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semslam/errors.hpp"
#include "semslam/sim/dataset.hpp"

namespace semslam {

using json = nlohmann::json;

namespace {

template <typename Vec>
json to_array(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json pose_json(const Pose& p) { return to_array(pose_log(p)); }

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& j, const char* key) {
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != N) throw std::runtime_error(std::string("field '") + key + "' needs " +
                                                               std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = a.at(i).get<double>();
  if (!v.allFinite()) throw std::runtime_error(std::string("field '") + key + "' is not finite");
  return v;
}

Pose pose_from(const json& j, const char* key) { return normalized(se3_exp<double>(vec<6>(j, key))); }

std::vector<int> int_list(const json& j, const char* key) {
  std::vector<int> out;
  for (const auto& x : j.at(key)) out.push_back(x.get<int>());
  return out;
}

}  // namespace

void write_dataset_stream(const Dataset& ds, std::ostream& out) {
  auto emit = [&](const json& j) { out << j.dump() << '\n'; };
  emit({{"format_version", kDatasetFormatVersion}, {"seed", ds.seed}});
  const Camera& c = ds.camera;
  emit({{"type", "camera"}, {"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
        {"height", c.height}});
  for (const auto& kf : ds.keyframes) {
    emit({{"type", "keyframe"}, {"id", kf.id}, {"odom", pose_json(kf.odom)}, {"gt_pose", pose_json(kf.gt_pose)}});
  }
  for (const auto& p : ds.points) {
    emit({{"type", "point_obs"}, {"frame", p.frame}, {"track", p.track}, {"u", p.pixel.x()}, {"v", p.pixel.y()}, {"gt_id", p.gt_id}});
  }
  for (const auto& p : ds.planes) {
    emit({{"type", "plane_obs"},
          {"frame", p.frame},
          {"coeffs", to_array(p.plane.coeffs())},
          {"inlier_tracks", p.inlier_tracks},
          {"gt_id", p.gt_id}});
  }
  for (const auto& o : ds.objects) {
    json j = {{"type", "object_obs"},
              {"frame", o.frame},
              {"bbox", {o.box.x_min, o.box.y_min, o.box.x_max, o.box.y_max}},
              {"class", o.box.class_id},
              {"score", o.box.score},
              {"tracks", o.tracks},
              {"gt_id", o.gt_id}};
    if (!o.cloud_file.empty()) j["cloud_file"] = o.cloud_file;
    emit(j);
  }
  for (std::size_t i = 0; i < ds.gt_points.size(); ++i) {
    emit({{"type", "gt_point"}, {"id", i}, {"xyz", to_array(ds.gt_points[i])}});
  }
  for (std::size_t i = 0; i < ds.gt_planes.size(); ++i) {
    emit({{"type", "gt_plane"}, {"id", i}, {"coeffs", to_array(ds.gt_planes[i].coeffs())}});
  }
  for (std::size_t i = 0; i < ds.gt_quadrics.size(); ++i) {
    int support = -1;
    for (const auto& [q, p] : ds.gt_supports) {
      if (q == static_cast<int>(i)) support = p;
    }
    emit({{"type", "gt_quadric"},
          {"id", i},
          {"frame", pose_json(ds.gt_quadrics[i].frame())},
          {"log_semi_axes", to_array(ds.gt_quadrics[i].log_semi_axes())},
          {"support", support}});
  }
}

Dataset read_dataset_stream(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_camera = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw std::runtime_error("record is not an object");
      if (!have_header) {
        const int version = j.at("format_version").get<int>();
        if (version != kDatasetFormatVersion)
          throw std::runtime_error("unsupported format_version " + std::to_string(version));
        ds.seed = j.value("seed", std::uint64_t{0});
        have_header = true;
        continue;
      }
      const std::string type = j.at("type").get<std::string>();
      if (type == "camera") {
        ds.camera = Camera{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                           j.at("cy").get<double>(),  j.at("width").get<int>(), j.at("height").get<int>()};
        if (!ds.camera.is_valid()) throw std::runtime_error("invalid camera");
        have_camera = true;
      } else if (type == "keyframe") {
        ds.keyframes.push_back({j.at("id").get<int>(), pose_from(j, "odom"), pose_from(j, "gt_pose")});
      } else if (type == "point_obs") {
        const Eigen::Vector2d px(j.at("u").get<double>(), j.at("v").get<double>());
        if (!px.allFinite()) throw std::runtime_error("non-finite pixel");
        ds.points.push_back({j.at("frame").get<int>(), j.at("track").get<int>(), px, j.value("gt_id", -1)});
      } else if (type == "plane_obs") {
        PlaneObservation p;
        p.frame = j.at("frame").get<int>();
        p.plane = make_plane(vec<4>(j, "coeffs"));
        p.inlier_tracks = int_list(j, "inlier_tracks");
        p.gt_id = j.value("gt_id", -1);
        ds.planes.push_back(std::move(p));
      } else if (type == "object_obs") {
        ObjectObservation o;
        o.frame = j.at("frame").get<int>();
        const Eigen::Vector4d b = vec<4>(j, "bbox");
        o.box = make_bbox(b(0), b(1), b(2), b(3), j.at("score").get<double>(), j.at("class").get<int>());
        o.tracks = int_list(j, "tracks");
        o.cloud_file = j.value("cloud_file", std::string());
        o.gt_id = j.value("gt_id", -1);
        ds.objects.push_back(std::move(o));
      } else if (type == "gt_point") {
        if (j.at("id").get<std::size_t>() != ds.gt_points.size()) throw std::runtime_error("gt_point ids out of order");
        ds.gt_points.push_back(vec<3>(j, "xyz"));
      } else if (type == "gt_plane") {
        if (j.at("id").get<std::size_t>() != ds.gt_planes.size()) throw std::runtime_error("gt_plane ids out of order");
        ds.gt_planes.push_back(make_plane(vec<4>(j, "coeffs")));
      } else if (type == "gt_quadric") {
        const int id = j.at("id").get<int>();
        if (id != static_cast<int>(ds.gt_quadrics.size())) throw std::runtime_error("gt_quadric ids out of order");
        ds.gt_quadrics.emplace_back(pose_from(j, "frame"), vec<3>(j, "log_semi_axes"));
        const int support = j.value("support", -1);
        if (support >= 0) ds.gt_supports.emplace_back(id, support);
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  if (!have_header) throw FormatError("missing format_version header", line_no + 1);
  if (!have_camera) throw FormatError("missing camera record", line_no + 1);
  for (std::size_t i = 0; i < ds.keyframes.size(); ++i) {
    if (ds.keyframes[i].id != static_cast<int>(i)) throw FormatError("keyframe ids must be 0..n-1 in order", line_no);
  }
  return ds;
}

void write_cloud(const std::vector<Eigen::Vector3d>& cloud, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << std::setprecision(17);
  for (const auto& x : cloud) out << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
}

std::vector<Eigen::Vector3d> read_cloud(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open cloud file " + file.string(), 0);
  std::vector<Eigen::Vector3d> cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Eigen::Vector3d x;
    if (!(ss >> x.x() >> x.y() >> x.z()) || !x.allFinite())
      throw FormatError(file.filename().string() + ": expected three numbers", line_no);
    cloud.push_back(x);
  }
  return cloud;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / kDatasetFileName);
  if (!out) throw std::runtime_error("cannot write " + (dir / kDatasetFileName).string());
  write_dataset_stream(ds, out);
  for (const auto& [name, cloud] : ds.clouds) write_cloud(cloud, dir / name);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto file = dir / kDatasetFileName;
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string(), 0);
  Dataset ds = read_dataset_stream(in);
  std::set<std::string> names;
  for (const auto& o : ds.objects) {
    if (!o.cloud_file.empty()) names.insert(o.cloud_file);
  }
  for (const auto& name : names) ds.clouds.emplace_back(name, read_cloud(dir / name));
  return ds;
}

}  // namespace semslam
