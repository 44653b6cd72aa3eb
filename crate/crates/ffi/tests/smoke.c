#include <math.h>
#include <stdio.h>

#include "eigenscan.h"

int main(void) {
    es_calibration cal;
    if (es_calibrate_tw_max(200, 10, 5000.0, &cal) != ES_STATUS_OK) {
        return 1;
    }
    printf("b = %.4f\n", cal.threshold_b);

    es_detector *det = NULL;
    if (es_detector_new(ES_PROCEDURE_MAX_EIG, 2, 3, 5.0, &det) != ES_STATUS_OK) {
        return 2;
    }
    const double rows[4][2] = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {4.0, 0.0}};
    es_step_result r;
    for (int i = 0; i < 4; i++) {
        if (es_detector_step(det, rows[i], 2, &r) != ES_STATUS_OK) {
            return 3;
        }
        if (r.state == ES_STEP_STATE_ALARM) {
            printf("alarm at %llu\n", (unsigned long long)r.time);
        }
    }

    if (es_detector_step(det, rows[0], 2, &r) != ES_STATUS_ALREADY_ALARMED) {
        return 4;
    }
    char msg[128];
    es_last_error_message(msg, sizeof msg);
    printf("error: %s\n", msg);
    es_detector_free(det);
    return 0;
}
