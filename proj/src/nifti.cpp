#include "dpreg/nifti.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace dpreg {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration, toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;
constexpr std::int16_t kIntentVector = 1007;

struct Parsed {
  Nifti1Header hdr;
  std::vector<double> data;  // NIfTI linear order (x fastest, component last)
};

Parsed read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("file not found: '" + path + "'");

  unsigned char probe[2] = {0, 0};
  is.read(reinterpret_cast<char*>(probe), 2);
  if (is.gcount() >= 2 && probe[0] == 0x1f && probe[1] == 0x8b)
    throw std::runtime_error("unsupported NIfTI feature: compressed stream (gzip)");
  is.clear();
  is.seekg(0);

  Parsed out;
  is.read(reinterpret_cast<char*>(&out.hdr), sizeof(Nifti1Header));
  if (is.gcount() != sizeof(Nifti1Header))
    throw std::runtime_error("malformed NIfTI header: file shorter than 348 bytes");
  const auto& h = out.hdr;
  if (h.sizeof_hdr != 348) {
    std::int32_t swapped = h.sizeof_hdr;
    auto* b = reinterpret_cast<unsigned char*>(&swapped);
    std::swap(b[0], b[3]);
    std::swap(b[1], b[2]);
    if (swapped == 348)
      throw std::runtime_error("unsupported NIfTI feature: big-endian byte order");
    throw std::runtime_error("malformed NIfTI header: sizeof_hdr is " +
                             std::to_string(h.sizeof_hdr));
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0) {
    if (std::memcmp(h.magic, "ni1", 4) == 0)
      throw std::runtime_error("unsupported NIfTI feature: detached .hdr/.img pair");
    throw std::runtime_error("malformed NIfTI header: bad magic");
  }
  if (h.dim[0] != 3 && h.dim[0] != 5)
    throw std::runtime_error("unsupported NIfTI feature: dim[0]=" +
                             std::to_string(h.dim[0]) + " (only 3-D volumes and "
                             "3-component 5-D fields are supported)");
  if (h.dim[0] == 5 && (h.dim[4] != 1 || h.dim[5] != 3))
    throw std::runtime_error("unsupported NIfTI feature: 5-D layout must be "
                             "dim[4]=1, dim[5]=3");
  if (h.datatype != kDtUint8 && h.datatype != kDtInt16 && h.datatype != kDtFloat32 &&
      h.datatype != kDtFloat64)
    throw std::runtime_error("unsupported NIfTI feature: datatype code " +
                             std::to_string(h.datatype));
  if ((h.qform_code != 0 && h.qform_code != 1) ||
      (h.sform_code != 0 && h.sform_code != 1))
    throw std::runtime_error("unsupported NIfTI feature: orientation code (qform " +
                             std::to_string(h.qform_code) + ", sform " +
                             std::to_string(h.sform_code) + ")");
  for (int a = 1; a <= 3; ++a) {
    if (h.dim[a] < 1)
      throw std::runtime_error("malformed NIfTI header: dim[" + std::to_string(a) +
                               "]=" + std::to_string(h.dim[a]));
    if (!(h.pixdim[a] > 0.0f))
      throw std::runtime_error("unsupported NIfTI feature: non-positive pixdim[" +
                               std::to_string(a) + "]");
  }
  if (h.vox_offset < 348.0f)
    throw std::runtime_error("malformed NIfTI header: vox_offset " +
                             std::to_string(h.vox_offset));

  const std::size_t nvox = static_cast<std::size_t>(h.dim[1]) * h.dim[2] * h.dim[3];
  const std::size_t total = nvox * (h.dim[0] == 5 ? 3 : 1);
  const std::size_t elem = static_cast<std::size_t>(h.bitpix) / 8;
  std::vector<char> raw(total * elem);
  is.seekg(static_cast<std::streamoff>(h.vox_offset));
  is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size())
    throw std::runtime_error("malformed NIfTI header: data shorter than header claims");

  out.data.resize(total);
  switch (h.datatype) {
    case kDtUint8:
      for (std::size_t i = 0; i < total; ++i)
        out.data[i] = static_cast<double>(reinterpret_cast<unsigned char*>(raw.data())[i]);
      break;
    case kDtInt16:
      for (std::size_t i = 0; i < total; ++i)
        out.data[i] = static_cast<double>(reinterpret_cast<std::int16_t*>(raw.data())[i]);
      break;
    case kDtFloat32:
      for (std::size_t i = 0; i < total; ++i)
        out.data[i] = static_cast<double>(reinterpret_cast<float*>(raw.data())[i]);
      break;
    case kDtFloat64:
      std::memcpy(out.data.data(), raw.data(), raw.size());
      break;
  }
  return out;
}

Grid grid_of(const Nifti1Header& h) {
  Grid g;
  g.extents = {static_cast<std::size_t>(h.dim[1]), static_cast<std::size_t>(h.dim[2]),
               static_cast<std::size_t>(h.dim[3])};
  g.spacing = {static_cast<double>(h.pixdim[1]), static_cast<double>(h.pixdim[2]),
               static_cast<double>(h.pixdim[3])};
  g.validate();
  return g;
}

// NIfTI linear order (x fastest) -> our (x,y,z) row-major (z fastest).
std::vector<double> to_internal(const std::vector<double>& file_order, const Grid& g,
                                std::size_t components) {
  const std::size_t W = g.extents[0], H = g.extents[1], D = g.extents[2];
  const std::size_t N = W * H * D;
  std::vector<double> out(components * N);
  for (std::size_t c = 0; c < components; ++c)
    for (std::size_t z = 0; z < D; ++z)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          out[c * N + (x * H + y) * D + z] = file_order[c * N + (z * H + y) * W + x];
  return out;
}

std::vector<double> to_file_order(const double* internal, const Grid& g,
                                  std::size_t components) {
  const std::size_t W = g.extents[0], H = g.extents[1], D = g.extents[2];
  const std::size_t N = W * H * D;
  std::vector<double> out(components * N);
  for (std::size_t c = 0; c < components; ++c)
    for (std::size_t z = 0; z < D; ++z)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          out[c * N + (z * H + y) * W + x] = internal[c * N + (x * H + y) * D + z];
  return out;
}

Nifti1Header make_header(const Grid& g, std::int16_t datatype, std::int16_t bitpix,
                         std::size_t components) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  if (components == 1) {
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(g.extents[0]);
    h.dim[2] = static_cast<std::int16_t>(g.extents[1]);
    h.dim[3] = static_cast<std::int16_t>(g.extents[2]);
    h.dim[4] = h.dim[5] = h.dim[6] = h.dim[7] = 1;
  } else {
    h.dim[0] = 5;
    h.dim[1] = static_cast<std::int16_t>(g.extents[0]);
    h.dim[2] = static_cast<std::int16_t>(g.extents[1]);
    h.dim[3] = static_cast<std::int16_t>(g.extents[2]);
    h.dim[4] = 1;
    h.dim[5] = 3;
    h.dim[6] = h.dim[7] = 1;
    h.intent_code = kIntentVector;
  }
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = static_cast<float>(g.spacing[0]);
  h.pixdim[2] = static_cast<float>(g.spacing[1]);
  h.pixdim[3] = static_cast<float>(g.spacing[2]);
  h.pixdim[4] = h.pixdim[5] = h.pixdim[6] = h.pixdim[7] = 1.0f;
  h.vox_offset = 352.0f;
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void write_file(const std::string& path, const Nifti1Header& h, const void* payload,
                std::size_t bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(&h), sizeof(h));
  const char pad[4] = {0, 0, 0, 0};
  os.write(pad, 4);  // header is 348 bytes, data starts at vox_offset 352
  os.write(reinterpret_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

NiftiInfo read_nifti_header(const std::string& path) {
  // Reuses the full reader's validation; header-only callers pay the data
  // read, which is fine at the sizes this subset supports.
  Parsed p = read_file(path);
  NiftiInfo info;
  info.grid = grid_of(p.hdr);
  info.datatype = p.hdr.datatype;
  info.components = p.hdr.dim[0] == 5 ? 3 : 1;
  return info;
}

Volume read_volume(const std::string& path) {
  Parsed p = read_file(path);
  if (p.hdr.dim[0] != 3)
    throw std::runtime_error("'" + path + "' is not a scalar volume (dim[0]=" +
                             std::to_string(p.hdr.dim[0]) + ")");
  const Grid g = grid_of(p.hdr);
  return Volume(g, Tensor(Shape{g.extents[0], g.extents[1], g.extents[2]},
                          to_internal(p.data, g, 1)));
}

LabelMap read_labelmap(const std::string& path) {
  Parsed p = read_file(path);
  if (p.hdr.dim[0] != 3)
    throw std::runtime_error("'" + path + "' is not a scalar volume (dim[0]=" +
                             std::to_string(p.hdr.dim[0]) + ")");
  if (p.hdr.datatype != kDtUint8 && p.hdr.datatype != kDtInt16)
    throw std::runtime_error("label map '" + path + "' must use an integer datatype");
  const Grid g = grid_of(p.hdr);
  const auto internal = to_internal(p.data, g, 1);
  std::vector<std::uint8_t> labels(internal.size());
  for (std::size_t i = 0; i < internal.size(); ++i) {
    const double v = internal[i];
    if (v != 0.0 && v != 1.0 && v != 2.0 && v != 3.0)
      throw std::runtime_error("label map '" + path + "' contains value " +
                               std::to_string(v) + " outside {0..3}");
    labels[i] = static_cast<std::uint8_t>(v);
  }
  return LabelMap(g, std::move(labels));
}

VectorField read_field(const std::string& path, FieldRole role) {
  Parsed p = read_file(path);
  if (p.hdr.dim[0] != 5)
    throw std::runtime_error("'" + path + "' is not a vector field (dim[0]=" +
                             std::to_string(p.hdr.dim[0]) + ")");
  const Grid g = grid_of(p.hdr);
  return VectorField(g, role,
                     Tensor(Shape{3, g.extents[0], g.extents[1], g.extents[2]},
                            to_internal(p.data, g, 3)));
}

void write_nifti(const Volume& v, const std::string& path) {
  const Nifti1Header h = make_header(v.grid, kDtFloat64, 64, 1);
  const auto payload = to_file_order(v.data.data(), v.grid, 1);
  write_file(path, h, payload.data(), payload.size() * sizeof(double));
}

void write_nifti(const LabelMap& m, const std::string& path) {
  const Nifti1Header h = make_header(m.grid, kDtUint8, 8, 1);
  const std::size_t W = m.grid.extents[0], H = m.grid.extents[1], D = m.grid.extents[2];
  std::vector<std::uint8_t> payload(m.labels.size());
  for (std::size_t z = 0; z < D; ++z)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        payload[(z * H + y) * W + x] = m.labels[(x * H + y) * D + z];
  write_file(path, h, payload.data(), payload.size());
}

void write_nifti(const VectorField& f, const std::string& path) {
  const Nifti1Header h = make_header(f.grid, kDtFloat64, 64, 3);
  const auto payload = to_file_order(f.data.data(), f.grid, 3);
  write_file(path, h, payload.data(), payload.size() * sizeof(double));
}

}  // namespace dpreg
