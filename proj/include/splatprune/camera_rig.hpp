#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "splatprune/error.hpp"
#include "splatprune/log.hpp"

namespace splatprune {

/// Rotation + translation acting as x' = R x + t.
struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return R * x + t; }
};

/// Calibrated zero-skew pinhole view. Pose is stored camera-to-world; the
/// camera looks down its +z axis with +x right and +y down (COLMAP/OpenCV).
struct CameraView {
  int view_id = 0;
  std::string image_name;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Eigen::Matrix3d R_c2w = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_c2w = Eigen::Vector3d::Zero();

  Eigen::Matrix3d K() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  /// Image name without directories or extension; used to pair masks.
  std::string key() const { return std::filesystem::path(image_name).stem().string(); }
};

inline constexpr double kRotationTolerance = 1e-5;

inline RigidTransform world_to_camera(const CameraView& view) {
  RigidTransform w2c;
  w2c.R = view.R_c2w.transpose();
  w2c.t = -w2c.R * view.t_c2w;
  return w2c;
}

inline RigidTransform camera_to_world(const CameraView& view) { return {view.R_c2w, view.t_c2w}; }

/// Enforces the CameraView invariants. A principal point outside the image
/// only warns.
inline void validate_view(const CameraView& view) {
  const std::string who = "view '" + view.image_name + "'";
  const double ortho = (view.R_c2w.transpose() * view.R_c2w - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det = view.R_c2w.determinant();
  if (!std::isfinite(ortho) || ortho >= kRotationTolerance || std::abs(det - 1.0) >= kRotationTolerance) {
    std::ostringstream msg;
    msg << who << ": R_c2w is not a proper rotation (max |RtR - I| = " << ortho << ", det = " << det << ")";
    throw Error(ErrorKind::NonOrthonormalRotation, msg.str());
  }
  if (!view.t_c2w.allFinite()) throw Error(ErrorKind::InvalidArgument, who + ": non-finite translation");
  if (!(view.fx > 0.0) || !(view.fy > 0.0)) throw Error(ErrorKind::InvalidArgument, who + ": focal lengths must be positive");
  if (view.width <= 0 || view.height <= 0) throw Error(ErrorKind::InvalidArgument, who + ": resolution must be positive");
  if (!(view.cx >= 0.0 && view.cx < view.width && view.cy >= 0.0 && view.cy < view.height)) {
    warn(who + ": principal point lies outside the image");
  }
}

namespace detail {

inline std::string chomp(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline bool is_blank_or_comment(const std::string& line) {
  const auto first = line.find_first_not_of(" \t");
  return first == std::string::npos || line[first] == '#';
}

struct ColmapIntrinsics {
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

inline ColmapIntrinsics parse_colmap_camera(const std::string& model, int width, int height,
                                            const std::vector<double>& p, const std::string& where) {
  auto need = [&](std::size_t n) {
    if (p.size() != n) {
      throw Error(ErrorKind::ParseError, where + ": model " + model + " expects " + std::to_string(n) + " parameters");
    }
  };
  auto zero_tail = [&](std::size_t from) {
    for (std::size_t i = from; i < p.size(); ++i) {
      if (p[i] != 0.0) {
        throw Error(ErrorKind::UnsupportedCameraModel,
                    where + ": model " + model + " has nonzero distortion; undistort the images first");
      }
    }
  };
  ColmapIntrinsics k{width, height};
  if (model == "SIMPLE_PINHOLE") {
    need(3);
    k.fx = k.fy = p[0];
    k.cx = p[1];
    k.cy = p[2];
  } else if (model == "PINHOLE") {
    need(4);
    k.fx = p[0];
    k.fy = p[1];
    k.cx = p[2];
    k.cy = p[3];
  } else if (model == "SIMPLE_RADIAL" || model == "RADIAL") {
    need(model == "RADIAL" ? 5 : 4);
    zero_tail(3);
    k.fx = k.fy = p[0];
    k.cx = p[1];
    k.cy = p[2];
  } else if (model == "OPENCV") {
    need(8);
    zero_tail(4);
    k.fx = p[0];
    k.fy = p[1];
    k.cx = p[2];
    k.cy = p[3];
  } else {
    throw Error(ErrorKind::UnsupportedCameraModel, where + ": camera model " + model + " is not supported");
  }
  return k;
}

template <typename T>
T parse_number(const std::string& token, const std::string& where) {
  std::istringstream in(token);
  T value{};
  if (!(in >> value) || !in.eof()) throw Error(ErrorKind::ParseError, where + ": bad number '" + token + "'");
  return value;
}

}  // namespace detail

/// Reads cameras.txt + images.txt. COLMAP poses are world-to-camera and are
/// inverted to camera-to-world here.
inline std::vector<CameraView> load_colmap_text(const std::filesystem::path& dir) {
  const auto cameras_path = dir / "cameras.txt";
  const auto images_path = dir / "images.txt";

  std::ifstream cams(cameras_path);
  if (!cams) throw Error(ErrorKind::IoFailure, "cannot open " + cameras_path.string());
  std::map<long, detail::ColmapIntrinsics> intrinsics;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(cams, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (detail::is_blank_or_comment(line)) continue;
    const std::string where = cameras_path.string() + ":" + std::to_string(lineno);
    std::istringstream in(line);
    std::string id, model, w, h;
    if (!(in >> id >> model >> w >> h)) throw Error(ErrorKind::ParseError, where + ": expected CAMERA_ID MODEL WIDTH HEIGHT");
    std::vector<double> params;
    for (std::string tok; in >> tok;) params.push_back(detail::parse_number<double>(tok, where));
    intrinsics[detail::parse_number<long>(id, where)] =
        detail::parse_colmap_camera(model, detail::parse_number<int>(w, where), detail::parse_number<int>(h, where), params, where);
  }

  std::ifstream imgs(images_path);
  if (!imgs) throw Error(ErrorKind::IoFailure, "cannot open " + images_path.string());
  std::vector<CameraView> views;
  lineno = 0;
  while (std::getline(imgs, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (detail::is_blank_or_comment(line)) continue;
    const std::string where = images_path.string() + ":" + std::to_string(lineno);
    std::istringstream in(line);
    std::string tok[9];
    for (auto& t : tok) {
      if (!(in >> t)) throw Error(ErrorKind::ParseError, where + ": expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
    }
    std::string name;
    std::getline(in >> std::ws, name);
    if (name.empty()) throw Error(ErrorKind::ParseError, where + ": missing image name");

    const long camera_id = detail::parse_number<long>(tok[8], where);
    auto cam = intrinsics.find(camera_id);
    if (cam == intrinsics.end()) {
      throw Error(ErrorKind::MissingCamera, where + ": image references unknown camera " + std::to_string(camera_id));
    }
    Eigen::Quaterniond q(detail::parse_number<double>(tok[1], where), detail::parse_number<double>(tok[2], where),
                         detail::parse_number<double>(tok[3], where), detail::parse_number<double>(tok[4], where));
    if (!(q.norm() > 0.0)) throw Error(ErrorKind::ParseError, where + ": zero quaternion");
    const Eigen::Matrix3d R_w2c = q.normalized().toRotationMatrix();
    const Eigen::Vector3d t_w2c(detail::parse_number<double>(tok[5], where), detail::parse_number<double>(tok[6], where),
                                detail::parse_number<double>(tok[7], where));

    CameraView view;
    view.view_id = detail::parse_number<int>(tok[0], where);
    view.image_name = name;
    view.fx = cam->second.fx;
    view.fy = cam->second.fy;
    view.cx = cam->second.cx;
    view.cy = cam->second.cy;
    view.width = cam->second.width;
    view.height = cam->second.height;
    view.R_c2w = R_w2c.transpose();
    view.t_c2w = -R_w2c.transpose() * t_w2c;
    validate_view(view);
    views.push_back(std::move(view));

    // The POINTS2D line always follows, possibly empty.
    if (std::getline(imgs, line)) ++lineno;
  }
  return views;
}

/// Writes a PINHOLE camera per view (camera id = view id).
inline void save_colmap_text(const std::vector<CameraView>& views, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream cams(dir / "cameras.txt");
  std::ofstream imgs(dir / "images.txt");
  if (!cams || !imgs) throw Error(ErrorKind::IoFailure, "cannot write COLMAP text model to " + dir.string());
  cams << std::setprecision(std::numeric_limits<double>::max_digits10);
  imgs << std::setprecision(std::numeric_limits<double>::max_digits10);
  cams << "# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  imgs << "# Image list with two lines of data per image:\n"
          "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
  for (const auto& v : views) {
    cams << v.view_id << " PINHOLE " << v.width << ' ' << v.height << ' ' << v.fx << ' ' << v.fy << ' ' << v.cx << ' '
         << v.cy << '\n';
    const RigidTransform w2c = world_to_camera(v);
    Eigen::Quaterniond q(w2c.R);
    q.normalize();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    imgs << v.view_id << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << w2c.t.x() << ' '
         << w2c.t.y() << ' ' << w2c.t.z() << ' ' << v.view_id << ' ' << v.image_name << "\n\n";
  }
  if (!cams || !imgs) throw Error(ErrorKind::IoFailure, "write failed for COLMAP text model in " + dir.string());
}

inline nlohmann::json cameras_to_json(const std::vector<CameraView>& views) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : views) {
    nlohmann::json j;
    j["view_id"] = v.view_id;
    j["image_name"] = v.image_name;
    j["fx"] = v.fx;
    j["fy"] = v.fy;
    j["cx"] = v.cx;
    j["cy"] = v.cy;
    j["width"] = v.width;
    j["height"] = v.height;
    std::vector<double> r;
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) r.push_back(v.R_c2w(row, col));
    j["R_c2w"] = r;
    j["t_c2w"] = {v.t_c2w.x(), v.t_c2w.y(), v.t_c2w.z()};
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<CameraView> cameras_from_json(const nlohmann::json& doc, const std::string& where = "<json>") {
  if (!doc.is_array()) throw Error(ErrorKind::ParseError, where + ": expected a JSON array of cameras");
  std::vector<CameraView> views;
  try {
    for (const auto& j : doc) {
      CameraView v;
      v.view_id = j.at("view_id").get<int>();
      v.image_name = j.at("image_name").get<std::string>();
      v.fx = j.at("fx").get<double>();
      v.fy = j.at("fy").get<double>();
      v.cx = j.at("cx").get<double>();
      v.cy = j.at("cy").get<double>();
      v.width = j.at("width").get<int>();
      v.height = j.at("height").get<int>();
      const auto r = j.at("R_c2w").get<std::vector<double>>();
      const auto t = j.at("t_c2w").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) {
        throw Error(ErrorKind::ParseError, where + ": R_c2w needs 9 numbers and t_c2w needs 3");
      }
      for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) v.R_c2w(row, col) = r[3 * row + col];
      v.t_c2w = Eigen::Vector3d(t[0], t[1], t[2]);
      validate_view(v);
      views.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, where + ": " + e.what());
  }
  return views;
}

inline std::vector<CameraView> load_cameras_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return cameras_from_json(doc, path.string());
}

inline void save_cameras_json(const std::vector<CameraView>& views, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << cameras_to_json(views).dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace splatprune
