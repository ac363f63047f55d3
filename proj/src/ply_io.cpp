#include "scenemap/ply_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "scenemap/errors.hpp"

namespace scenemap {

void write_ply(const std::string& path, const std::vector<PlyVertex>& vertices) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "ply\nformat binary_little_endian 1.0\n";
  os << "element vertex " << vertices.size() << "\n";
  os << "property float x\nproperty float y\nproperty float z\n";
  os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  os << "property uint object_id\n";
  os << "end_header\n";
  for (const PlyVertex& v : vertices) {
    os.write(reinterpret_cast<const char*>(&v.x), 4);
    os.write(reinterpret_cast<const char*>(&v.y), 4);
    os.write(reinterpret_cast<const char*>(&v.z), 4);
    os.write(reinterpret_cast<const char*>(&v.r), 1);
    os.write(reinterpret_cast<const char*>(&v.g), 1);
    os.write(reinterpret_cast<const char*>(&v.b), 1);
    os.write(reinterpret_cast<const char*>(&v.object_id), 4);
  }
  if (!os) throw DataError("short write: " + path);
}

namespace {

struct Property {
  std::string name;
  int size = 0;
  bool is_float = false;
  bool is_double = false;
};

int type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
      type == "float32") {
    return 4;
  }
  if (type == "double" || type == "float64" || type == "int64" || type == "uint64") return 8;
  throw DataError("ply: unsupported property type " + type);
}

double read_scalar(const char* data, const Property& prop) {
  if (prop.is_double) {
    double v;
    std::memcpy(&v, data, 8);
    return v;
  }
  if (prop.is_float) {
    float v;
    std::memcpy(&v, data, 4);
    return v;
  }
  if (prop.size == 1) return static_cast<double>(static_cast<unsigned char>(data[0]));
  if (prop.size == 4) {
    std::uint32_t v;
    std::memcpy(&v, data, 4);
    return static_cast<double>(v);
  }
  if (prop.size == 2) {
    std::uint16_t v;
    std::memcpy(&v, data, 2);
    return static_cast<double>(v);
  }
  std::uint64_t v;
  std::memcpy(&v, data, 8);
  return static_cast<double>(v);
}

}  // namespace

std::vector<PlyVertex> read_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError(path);
  std::string line;
  if (!std::getline(is, line) || line != "ply") throw DataError("not a ply file: " + path);

  size_t vertex_count = 0;
  std::vector<Property> properties;
  bool binary_le = false;
  bool in_vertex_element = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    if (token == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = (fmt == "binary_little_endian");
    } else if (token == "element") {
      std::string name;
      size_t count;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (token == "property" && in_vertex_element) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw DataError("ply: list properties unsupported in vertex element");
      Property prop;
      prop.name = name;
      prop.size = type_size(type);
      prop.is_float = (type == "float" || type == "float32");
      prop.is_double = (type == "double" || type == "float64");
      properties.push_back(prop);
    } else if (token == "end_header") {
      break;
    }
  }
  if (!binary_le) throw DataError("ply: only binary_little_endian is supported: " + path);

  size_t stride = 0;
  for (const Property& p : properties) stride += p.size;
  std::vector<char> row(stride);
  std::vector<PlyVertex> vertices;
  vertices.reserve(vertex_count);
  for (size_t i = 0; i < vertex_count; ++i) {
    is.read(row.data(), static_cast<std::streamsize>(stride));
    if (!is) throw DataError("ply: truncated payload: " + path);
    PlyVertex v;
    size_t offset = 0;
    for (const Property& p : properties) {
      const double value = read_scalar(row.data() + offset, p);
      if (p.name == "x") v.x = static_cast<float>(value);
      else if (p.name == "y") v.y = static_cast<float>(value);
      else if (p.name == "z") v.z = static_cast<float>(value);
      else if (p.name == "red") v.r = static_cast<std::uint8_t>(value);
      else if (p.name == "green") v.g = static_cast<std::uint8_t>(value);
      else if (p.name == "blue") v.b = static_cast<std::uint8_t>(value);
      else if (p.name == "object_id") v.object_id = static_cast<std::uint32_t>(value);
      offset += p.size;
    }
    vertices.push_back(v);
  }
  return vertices;
}

std::vector<Eigen::Vector3d> ply_positions(const std::vector<PlyVertex>& vertices) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(vertices.size());
  for (const PlyVertex& v : vertices) out.emplace_back(v.x, v.y, v.z);
  return out;
}

}  // namespace scenemap
