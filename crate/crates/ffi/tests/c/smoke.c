#include <stdio.h>
#include "optdesign.h"

int main(void) {
    const char *json =
        "{\"region\":{\"dim\":1,\"kind\":\"box\",\"lower\":[0],\"upper\":[1]},"
        "\"model\":{\"family\":\"linear_gaussian\",\"with_intercept\":true,\"beta\":[0,1]},"
        "\"points\":[{\"x\":[0],\"w\":0.5},{\"x\":[1],\"w\":0.5}]}";
    OdDesign *d = NULL;
    OdModel *m = NULL;
    double value = 0.0;
    if (od_design_from_json(json, 0.0, &d) != OD_STATUS_OK) {
        fprintf(stderr, "%s\n", od_last_error_message());
        return 1;
    }
    if (od_design_model(d, &m) != OD_STATUS_OK) return 1;
    if (od_criterion(d, m, OD_CRITERION_D, &value) != OD_STATUS_OK) return 1;
    printf("%.12f\n", value);
    od_model_free(m);
    od_design_free(d);
    return 0;
}
