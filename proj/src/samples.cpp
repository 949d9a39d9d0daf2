#include "hybridx/samples.hpp"

#include <stdexcept>

namespace hybridx {

void validate(const AdosRecord& record) {
    for (int i = 0; i < kFeatureCount; ++i) {
        if (!is_legal_score(record.scores[i])) {
            throw std::invalid_argument("AdosRecord: illegal score " + std::to_string(record.scores[i]) +
                                        " for feature " + kFeatureNames[i] + " (patient " +
                                        record.patient_id + ")");
        }
    }
}

void validate(const ImageSample& sample) {
    if (sample.pixels.rank() != 3 || sample.pixels.extent(0) != 3)
        throw std::invalid_argument("ImageSample: pixels must be [3,H,W], got " +
                                    sample.pixels.shape_str());
    if (sample.pixels.extent(1) != sample.pixels.extent(2))
        throw std::invalid_argument("ImageSample: image must be square, got " +
                                    sample.pixels.shape_str());
    for (std::size_t i = 0; i < sample.pixels.size(); ++i) {
        const double v = sample.pixels[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("ImageSample: pixel value " + std::to_string(v) +
                                        " outside [0,1]");
    }
}

void validate(const PatientBundle& bundle) {
    if (bundle.images.empty())
        throw std::invalid_argument("PatientBundle " + bundle.patient_id + ": no images");
    if (bundle.ados.patient_id != bundle.patient_id)
        throw std::invalid_argument("PatientBundle " + bundle.patient_id +
                                    ": behavior record belongs to " + bundle.ados.patient_id);
    if (bundle.ados.label != bundle.label)
        throw std::invalid_argument("PatientBundle " + bundle.patient_id +
                                    ": behavior record label disagrees with bundle label");
    validate(bundle.ados);
    for (const ImageSample& img : bundle.images) {
        if (img.patient_id != bundle.patient_id)
            throw std::invalid_argument("PatientBundle " + bundle.patient_id + ": image belongs to " +
                                        img.patient_id);
        if (img.label != bundle.label)
            throw std::invalid_argument("PatientBundle " + bundle.patient_id +
                                        ": image label disagrees with bundle label");
        validate(img);
    }
}

}  // namespace hybridx
