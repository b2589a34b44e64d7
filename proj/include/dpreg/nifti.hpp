// Minimal NIfTI-1 subset: uncompressed single-file .nii, little-endian,
// datatypes uint8/int16/float32/float64, dim[0] in {3,5}. Vector fields are
// stored with dim[0]=5, dim[5]=3, intent code 1007. qform/sform are ignored
// beyond pixdim; only orientation codes 0 and 1 are accepted.

#pragma once

#include <string>

#include "dpreg/fields.hpp"

namespace dpreg {

struct NiftiInfo {
  Grid grid;
  int datatype = 0;      // NIfTI datatype code
  int components = 1;    // 1 for scalar volumes, 3 for vector fields
};

NiftiInfo read_nifti_header(const std::string& path);

Volume read_volume(const std::string& path);
LabelMap read_labelmap(const std::string& path);
VectorField read_field(const std::string& path,
                       FieldRole role = FieldRole::deformation);

void write_nifti(const Volume& v, const std::string& path);
void write_nifti(const LabelMap& m, const std::string& path);
void write_nifti(const VectorField& f, const std::string& path);

}  // namespace dpreg
